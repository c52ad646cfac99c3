//! Convex hulls: 2D monotone chain for image-plane regions and a 3D
//! quickhull that reports which input points are hull vertices (the test
//! needed by hidden point removal).

use nalgebra::{Vector2, Vector3};

use crate::error::{Error, Result};

/// Relative tolerance for orientation predicates, scaled by the cloud extent.
const PLANE_EPS_REL: f64 = 1e-10;

// --- 2D ----------------------------------------------------------------------

/// Convex hull of a 2D point set, counter-clockwise under the standard
/// orientation (positive signed area), collinear interior points dropped.
///
/// Returns an error when fewer than 3 distinct points remain or all points
/// are collinear.
pub fn convex_hull_2d(points: &[Vector2<f64>]) -> Result<Vec<Vector2<f64>>> {
    let mut pts: Vec<Vector2<f64>> = points.to_vec();
    pts.sort_by(|a, b| (a.x, a.y).partial_cmp(&(b.x, b.y)).unwrap());
    pts.dedup_by(|a, b| a.x == b.x && a.y == b.y);
    if pts.len() < 3 {
        return Err(Error::degenerate(
            "convex_hull_2d",
            format!("{} distinct points, need at least 3", pts.len()),
        ));
    }
    let cross = |o: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>| -> f64 {
        (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
    };
    let mut lower: Vec<Vector2<f64>> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<Vector2<f64>> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() < 3 {
        return Err(Error::degenerate("convex_hull_2d", "all points collinear"));
    }
    Ok(lower)
}

/// Signed area of a simple polygon (positive for counter-clockwise).
pub fn polygon_area(polygon: &[Vector2<f64>]) -> f64 {
    let n = polygon.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        acc += a.x * b.y - a.y * b.x;
    }
    acc / 2.0
}

/// Point-in-convex-polygon with boundary counted as inside.
///
/// `polygon` must be counter-clockwise (as produced by [`convex_hull_2d`]).
pub fn convex_polygon_contains(polygon: &[Vector2<f64>], p: Vector2<f64>) -> bool {
    let n = polygon.len();
    if n < 3 {
        return false;
    }
    let mut scale: f64 = 0.0;
    for v in polygon {
        scale = scale.max(v.x.abs()).max(v.y.abs());
    }
    let eps = 1e-9 * scale.max(1.0);
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        let cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        if cross < -eps {
            return false;
        }
    }
    true
}

// --- 3D ----------------------------------------------------------------------

#[derive(Clone)]
struct Face {
    verts: [u32; 3],
    normal: Vector3<f64>,
    offset: f64,
    outside: Vec<u32>,
    alive: bool,
}

impl Face {
    fn new(a: u32, b: u32, c: u32, pts: &[Vector3<f64>]) -> Self {
        let pa = pts[a as usize];
        let n = (pts[b as usize] - pa).cross(&(pts[c as usize] - pa));
        let norm = n.norm();
        let normal = if norm > 0.0 { n / norm } else { n };
        Face {
            verts: [a, b, c],
            normal,
            offset: normal.dot(&pa),
            outside: Vec::new(),
            alive: true,
        }
    }

    fn dist(&self, p: &Vector3<f64>) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

/// Flags the input points that are vertices of the 3D convex hull.
///
/// Quickhull with conflict lists; orientation tests use a tolerance relative
/// to the cloud extent, and a deterministic epsilon perturbation retry covers
/// near-degenerate inputs. Errors when the cloud is flat (rank < 3).
pub fn convex_hull_flags(points: &[Vector3<f64>]) -> Result<Vec<bool>> {
    match quickhull(points) {
        Ok(flags) => Ok(flags),
        Err(Error::Degenerate { reason, .. }) if reason == RETRY_REASON => {
            // Perturb deterministically by a hair and retry once; flags refer
            // to the original indices so the caller sees no difference.
            let scale = cloud_scale(points);
            let jitter = 1e-9 * scale;
            let perturbed: Vec<Vector3<f64>> = points
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let h = splitmix(i as u64);
                    Vector3::new(
                        p.x + jitter * unit_from_hash(h),
                        p.y + jitter * unit_from_hash(h.wrapping_mul(0x9e37_79b9_7f4a_7c15)),
                        p.z + jitter * unit_from_hash(h.rotate_left(17)),
                    )
                })
                .collect();
            quickhull(&perturbed)
        }
        Err(e) => Err(e),
    }
}

const RETRY_REASON: &str = "hull update stalled";

fn cloud_scale(points: &[Vector3<f64>]) -> f64 {
    points
        .iter()
        .map(|p| p.x.abs().max(p.y.abs()).max(p.z.abs()))
        .fold(0.0f64, f64::max)
        .max(1e-300)
}

fn splitmix(seed: u64) -> u64 {
    let mut x = seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn unit_from_hash(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

fn quickhull(points: &[Vector3<f64>]) -> Result<Vec<bool>> {
    let n = points.len();
    if n < 4 {
        return Err(Error::degenerate(
            "convex_hull_3d",
            format!("{n} points, need at least 4"),
        ));
    }
    let eps = PLANE_EPS_REL * cloud_scale(points);

    let (i0, i1, i2, i3) = initial_simplex(points, eps)?;
    let mut faces: Vec<Face> = Vec::new();
    // Orient the simplex so every face points away from the fourth vertex.
    for (a, b, c, d) in [
        (i0, i1, i2, i3),
        (i0, i3, i1, i2),
        (i0, i2, i3, i1),
        (i1, i3, i2, i0),
    ] {
        let mut face = Face::new(a, b, c, points);
        if face.dist(&points[d as usize]) > 0.0 {
            face = Face::new(a, c, b, points);
        }
        faces.push(face);
    }

    // Seed the conflict lists.
    for (idx, p) in points.iter().enumerate() {
        let idx = idx as u32;
        if idx == i0 || idx == i1 || idx == i2 || idx == i3 {
            continue;
        }
        for face in faces.iter_mut() {
            if face.dist(p) > eps {
                face.outside.push(idx);
                break;
            }
        }
    }

    let mut pending: Vec<usize> = (0..faces.len()).collect();
    let max_steps = 64 * n + 1024;
    let mut steps = 0usize;
    while let Some(fi) = pending.pop() {
        if !faces[fi].alive || faces[fi].outside.is_empty() {
            continue;
        }
        steps += 1;
        if steps > max_steps {
            return Err(Error::degenerate("convex_hull_3d", RETRY_REASON));
        }
        // Farthest conflict point of this face becomes the new apex.
        let apex = *faces[fi]
            .outside
            .iter()
            .max_by(|&&a, &&b| {
                faces[fi]
                    .dist(&points[a as usize])
                    .partial_cmp(&faces[fi].dist(&points[b as usize]))
                    .unwrap()
            })
            .unwrap();
        let apex_p = points[apex as usize];

        // Visible set: every alive face the apex lies strictly outside of.
        // BTreeMap keeps horizon traversal deterministic run to run.
        let mut orphans: Vec<u32> = Vec::new();
        let mut edge_count: std::collections::BTreeMap<(u32, u32), (u32, u32)> =
            std::collections::BTreeMap::new();
        for face in faces.iter_mut().filter(|f| f.alive) {
            if face.dist(&apex_p) > eps {
                face.alive = false;
                orphans.append(&mut face.outside);
                for k in 0..3 {
                    let u = face.verts[k];
                    let v = face.verts[(k + 1) % 3];
                    let key = (u.min(v), u.max(v));
                    let entry = edge_count.entry(key).or_insert((0, 0));
                    entry.0 += 1;
                    // Remember the directed orientation seen from the visible side.
                    entry.1 = if u < v { 1 } else { 0 };
                    if entry.0 == 2 {
                        edge_count.remove(&key);
                    }
                }
            }
        }

        // Horizon edges are those bordering exactly one visible face; new
        // faces keep the visible face's winding so normals stay outward.
        let mut new_faces: Vec<Face> = Vec::new();
        for (&(a, b), &(count, dir)) in edge_count.iter() {
            debug_assert_eq!(count, 1);
            let (u, v) = if dir == 1 { (a, b) } else { (b, a) };
            new_faces.push(Face::new(u, v, apex, points));
        }
        if new_faces.is_empty() {
            return Err(Error::degenerate("convex_hull_3d", RETRY_REASON));
        }
        for face in new_faces {
            let slot = faces.len();
            faces.push(face);
            pending.push(slot);
        }
        // Redistribute orphaned conflict points among the new faces.
        'points: for idx in orphans {
            if idx == apex {
                continue;
            }
            let p = &points[idx as usize];
            for fi in (0..faces.len()).rev() {
                if !faces[fi].alive {
                    continue;
                }
                if faces[fi].dist(p) > eps {
                    faces[fi].outside.push(idx);
                    continue 'points;
                }
                // Only the freshly created faces can claim orphans; older
                // faces already rejected them. Stop scanning once past them.
                if faces[fi].verts[2] != apex {
                    break;
                }
            }
        }
    }

    let mut flags = vec![false; n];
    for face in faces.iter().filter(|f| f.alive) {
        for &v in &face.verts {
            flags[v as usize] = true;
        }
    }
    Ok(flags)
}

fn initial_simplex(points: &[Vector3<f64>], eps: f64) -> Result<(u32, u32, u32, u32)> {
    // Extreme pair along the axis of largest spread.
    let mut best = (0usize, 1usize, -1.0f64);
    for axis in 0..3 {
        let (mut lo, mut hi) = (0usize, 0usize);
        for (i, p) in points.iter().enumerate() {
            if p[axis] < points[lo][axis] {
                lo = i;
            }
            if p[axis] > points[hi][axis] {
                hi = i;
            }
        }
        let d = points[hi][axis] - points[lo][axis];
        if d > best.2 {
            best = (lo, hi, d);
        }
    }
    let (i0, i1, spread) = best;
    if spread <= eps {
        return Err(Error::degenerate("convex_hull_3d", "all points coincident"));
    }
    let p0 = points[i0];
    let dir = (points[i1] - p0).normalize();
    // Farthest point from the line.
    let mut i2 = usize::MAX;
    let mut best_d = eps;
    for (i, p) in points.iter().enumerate() {
        let rel = p - p0;
        let d = (rel - dir * rel.dot(&dir)).norm();
        if d > best_d {
            best_d = d;
            i2 = i;
        }
    }
    if i2 == usize::MAX {
        return Err(Error::degenerate("convex_hull_3d", "points are collinear"));
    }
    // Farthest point from the plane.
    let normal = (points[i1] - p0).cross(&(points[i2] - p0)).normalize();
    let mut i3 = usize::MAX;
    let mut best_d = eps;
    for (i, p) in points.iter().enumerate() {
        let d = (p - p0).dot(&normal).abs();
        if d > best_d {
            best_d = d;
            i3 = i;
        }
    }
    if i3 == usize::MAX {
        return Err(Error::degenerate("convex_hull_3d", "points are coplanar"));
    }
    Ok((i0 as u32, i1 as u32, i2 as u32, i3 as u32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn v3(x: f64, y: f64, z: f64) -> Vector3<f64> {
        Vector3::new(x, y, z)
    }

    #[test]
    fn hull_2d_square_with_interior() {
        let pts = vec![
            Vector2::new(0.0, 0.0),
            Vector2::new(2.0, 0.0),
            Vector2::new(2.0, 2.0),
            Vector2::new(0.0, 2.0),
            Vector2::new(1.0, 1.0),
            Vector2::new(0.5, 0.5),
        ];
        let hull = convex_hull_2d(&pts).unwrap();
        assert_eq!(hull.len(), 4);
        assert!(polygon_area(&hull) > 0.0);
        for p in &pts {
            assert!(convex_polygon_contains(&hull, *p));
        }
        assert!(!convex_polygon_contains(&hull, Vector2::new(3.0, 1.0)));
    }

    #[test]
    fn hull_2d_rejects_collinear() {
        let pts: Vec<Vector2<f64>> = (0..5).map(|i| Vector2::new(i as f64, 2.0 * i as f64)).collect();
        assert!(convex_hull_2d(&pts).is_err());
    }

    #[test]
    fn hull_3d_cube_corners_only() {
        let mut pts = Vec::new();
        for x in [0.0, 1.0] {
            for y in [0.0, 1.0] {
                for z in [0.0, 1.0] {
                    pts.push(v3(x, y, z));
                }
            }
        }
        let corners = pts.len();
        // interior points
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            pts.push(v3(
                rng.gen_range(0.05..0.95),
                rng.gen_range(0.05..0.95),
                rng.gen_range(0.05..0.95),
            ));
        }
        let flags = convex_hull_flags(&pts).unwrap();
        for (i, f) in flags.iter().enumerate() {
            assert_eq!(*f, i < corners, "point {i}");
        }
    }

    #[test]
    fn hull_3d_sphere_all_vertices() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vector3<f64>> = (0..500)
            .map(|_| {
                let p = v3(
                    rng.sample(rand_distr::StandardNormal),
                    rng.sample(rand_distr::StandardNormal),
                    rng.sample(rand_distr::StandardNormal),
                );
                p.normalize() * 10.0
            })
            .collect();
        let flags = convex_hull_flags(&pts).unwrap();
        let on = flags.iter().filter(|&&f| f).count();
        assert_eq!(on, pts.len(), "every sphere point is a hull vertex");
    }

    #[test]
    fn hull_3d_coplanar_is_degenerate() {
        let mut pts = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                pts.push(v3(i as f64, j as f64, 5.0));
            }
        }
        let err = convex_hull_flags(&pts).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn hull_3d_tetrahedron_simplex() {
        let pts = vec![v3(0.0, 0.0, 0.0), v3(1.0, 0.0, 0.0), v3(0.0, 1.0, 0.0), v3(0.0, 0.0, 1.0)];
        let flags = convex_hull_flags(&pts).unwrap();
        assert!(flags.iter().all(|&f| f));
    }

    #[test]
    fn hull_3d_handles_duplicates() {
        let mut pts = vec![
            v3(0.0, 0.0, 0.0),
            v3(4.0, 0.0, 0.0),
            v3(0.0, 4.0, 0.0),
            v3(0.0, 0.0, 4.0),
        ];
        let dup_corner_from = pts.len();
        for _ in 0..6 {
            pts.push(v3(4.0, 4.0, 4.0)); // coincident extreme corner copies
        }
        let interior_from = pts.len();
        for _ in 0..6 {
            pts.push(v3(1.0, 1.0, 1.0)); // coincident interior copies
        }
        let flags = convex_hull_flags(&pts).unwrap();
        assert!(flags[..4].iter().all(|&f| f));
        let corner_hits = flags[dup_corner_from..interior_from].iter().filter(|&&f| f).count();
        assert_eq!(corner_hits, 1, "exactly one copy of a coincident corner is a hull vertex");
        assert!(!flags[interior_from..].iter().any(|&f| f), "interior duplicates stay inside");
    }
}
