//! Morphable face model: mean shape, deformation components, mesh topology
//! and landmark annotations, plus the binary/JSON container format.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"C3DM";
const FORMAT_VERSION: u32 = 1;

/// Eye selector; sides are in image space (the subject's right eye appears
/// on the image left).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Eye {
    Left,
    Right,
}

impl Eye {
    pub const BOTH: [Eye; 2] = [Eye::Left, Eye::Right];

    pub fn index(self) -> usize {
        match self {
            Eye::Left => 0,
            Eye::Right => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Eye::Left => "left",
            Eye::Right => "right",
        }
    }
}

/// One-ring adjacency derived from the triangle list.
#[derive(Debug, Clone)]
pub struct VertexNeighborhood {
    adjacency: Vec<Vec<u32>>,
}

impl VertexNeighborhood {
    fn from_faces(faces: &[[u32; 3]], vertex_count: usize) -> Self {
        let mut adjacency = vec![Vec::new(); vertex_count];
        for f in faces {
            for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                adjacency[a as usize].push(b);
                adjacency[b as usize].push(a);
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        VertexNeighborhood { adjacency }
    }

    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.adjacency[v as usize]
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }
}

/// Mean face mesh plus a linear deformation basis and landmark index sets.
///
/// Immutable after construction; all pipeline stages share it read-only.
#[derive(Debug, Clone)]
pub struct MorphableModel {
    mean: DMatrix<f64>,
    components: Vec<DMatrix<f64>>,
    reg_weights: DVector<f64>,
    faces: Vec<[u32; 3]>,
    op_indices: [u32; 5],
    lm68_indices: [u32; 68],
    canthus_indices: [u32; 2],
    neighborhood: VertexNeighborhood,
}

impl MorphableModel {
    /// Validates every field and builds the cached adjacency.
    pub fn new(
        mean: DMatrix<f64>,
        components: Vec<DMatrix<f64>>,
        reg_weights: DVector<f64>,
        faces: Vec<[u32; 3]>,
        op_indices: [u32; 5],
        lm68_indices: [u32; 68],
        canthus_indices: [u32; 2],
    ) -> Result<Self> {
        if mean.nrows() != 3 || mean.ncols() == 0 {
            return Err(Error::model(
                "mean_shape",
                format!("expected a 3xV matrix, got {}x{}", mean.nrows(), mean.ncols()),
            ));
        }
        let v = mean.ncols();
        if mean.iter().any(|x| !x.is_finite()) {
            return Err(Error::model("mean_shape", "non-finite coordinate"));
        }
        if reg_weights.len() != components.len() {
            return Err(Error::model(
                "reg_weights",
                format!(
                    "length {} does not match component count {}",
                    reg_weights.len(),
                    components.len()
                ),
            ));
        }
        for (i, w) in reg_weights.iter().enumerate() {
            if !(w.is_finite() && *w > 0.0) {
                return Err(Error::model(
                    "reg_weights",
                    format!("weight {i} is {w}; weights must be strictly positive"),
                ));
            }
        }
        for (i, c) in components.iter().enumerate() {
            if c.nrows() != 3 || c.ncols() != v {
                return Err(Error::model(
                    "components",
                    format!(
                        "component {i} is {}x{}, expected 3x{v} to match the mean shape",
                        c.nrows(),
                        c.ncols()
                    ),
                ));
            }
            if c.iter().any(|x| !x.is_finite()) {
                return Err(Error::model("components", format!("component {i} has non-finite entry")));
            }
        }
        for (fi, f) in faces.iter().enumerate() {
            for &idx in f {
                if idx as usize >= v {
                    return Err(Error::model(
                        "faces",
                        format!("face {fi} references vertex {idx}, but V = {v}"),
                    ));
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::model("faces", format!("face {fi} repeats a vertex")));
            }
        }
        check_indices("op_indices", &op_indices, v)?;
        check_indices("lm68_indices", &lm68_indices, v)?;
        check_indices("canthus_indices", &canthus_indices, v)?;

        let neighborhood = VertexNeighborhood::from_faces(&faces, v);
        if !is_connected(&neighborhood) {
            return Err(Error::model("faces", "mesh is not a single connected component"));
        }

        Ok(MorphableModel {
            mean,
            components,
            reg_weights,
            faces,
            op_indices,
            lm68_indices,
            canthus_indices,
            neighborhood,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.mean.ncols()
    }

    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Mean shape as a 3xV matrix, one vertex per column.
    pub fn mean(&self) -> &DMatrix<f64> {
        &self.mean
    }

    /// Deformation component `i` as a 3xV displacement field.
    pub fn component(&self, i: usize) -> &DMatrix<f64> {
        &self.components[i]
    }

    pub fn reg_weights(&self) -> &DVector<f64> {
        &self.reg_weights
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn op_indices(&self) -> &[u32; 5] {
        &self.op_indices
    }

    pub fn lm68_indices(&self) -> &[u32; 68] {
        &self.lm68_indices
    }

    pub fn canthus_indices(&self) -> &[u32; 2] {
        &self.canthus_indices
    }

    pub fn canthus_vertex(&self, eye: Eye) -> u32 {
        self.canthus_indices[eye.index()]
    }

    pub fn neighborhood(&self) -> &VertexNeighborhood {
        &self.neighborhood
    }

    /// Gathers the 3D positions of `indices` from `shape` (3xV) as a 3xN matrix.
    pub fn gather(shape: &DMatrix<f64>, indices: &[u32]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(3, indices.len());
        for (j, &idx) in indices.iter().enumerate() {
            out.set_column(j, &shape.column(idx as usize));
        }
        out
    }

    /// Mean-shape positions of an index set.
    pub fn landmarks(&self, indices: &[u32]) -> DMatrix<f64> {
        Self::gather(&self.mean, indices)
    }

    /// All vertices within graph distance `k` of `seed` (inclusive), sorted.
    pub fn k_ring(&self, seed: u32, k: u32) -> Result<Vec<u32>> {
        if seed as usize >= self.vertex_count() {
            return Err(Error::invalid(format!(
                "k_ring seed {seed} out of range (V = {})",
                self.vertex_count()
            )));
        }
        let mut dist = vec![u32::MAX; self.vertex_count()];
        let mut queue = VecDeque::new();
        dist[seed as usize] = 0;
        queue.push_back(seed);
        let mut out = vec![seed];
        while let Some(u) = queue.pop_front() {
            let d = dist[u as usize];
            if d == k {
                continue;
            }
            for &w in self.neighborhood.neighbors(u) {
                if dist[w as usize] == u32::MAX {
                    dist[w as usize] = d + 1;
                    queue.push_back(w);
                    out.push(w);
                }
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Largest pairwise extent of the mean shape (bounding box diagonal).
    pub fn mean_extent(&self) -> f64 {
        shape_extent(&self.mean)
    }
}

/// Bounding box diagonal of a 3xN point set.
pub fn shape_extent(shape: &DMatrix<f64>) -> f64 {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for c in shape.column_iter() {
        for i in 0..3 {
            lo[i] = lo[i].min(c[i]);
            hi[i] = hi[i].max(c[i]);
        }
    }
    (hi - lo).norm()
}

fn check_indices(field: &'static str, indices: &[u32], v: usize) -> Result<()> {
    for &idx in indices {
        if idx as usize >= v {
            return Err(Error::model(
                field,
                format!("index {idx} out of range (V = {v})"),
            ));
        }
    }
    Ok(())
}

fn is_connected(nb: &VertexNeighborhood) -> bool {
    let n = nb.vertex_count();
    if n == 0 {
        return false;
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0u32]);
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for &w in nb.neighbors(u) {
            if !seen[w as usize] {
                seen[w as usize] = true;
                count += 1;
                queue.push_back(w);
            }
        }
    }
    count == n
}

// --- container format -------------------------------------------------------

/// Loads a model container; binary (`C3DM` magic) or the JSON variant.
pub fn load_model(path: impl AsRef<Path>) -> Result<MorphableModel> {
    let path = path.as_ref();
    let mut file = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut magic = [0u8; 4];
    file.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
    if &magic == MAGIC {
        read_binary(&mut file).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
    } else {
        let mut rest = Vec::new();
        file.read_to_end(&mut rest).map_err(|e| Error::io(path, e))?;
        let mut bytes = magic.to_vec();
        bytes.extend_from_slice(&rest);
        let json: ModelJson = serde_json::from_slice(&bytes)?;
        json.into_model()
    }
}

/// Writes the binary container.
pub fn save_model(model: &MorphableModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    write_binary(model, &mut w).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn write_binary(model: &MorphableModel, w: &mut impl Write) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
    w.write_u32::<LittleEndian>(model.vertex_count() as u32)?;
    w.write_u32::<LittleEndian>(model.component_count() as u32)?;
    w.write_u32::<LittleEndian>(model.face_count() as u32)?;
    for x in model.mean.iter() {
        w.write_f64::<LittleEndian>(*x)?;
    }
    for c in &model.components {
        for x in c.iter() {
            w.write_f64::<LittleEndian>(*x)?;
        }
    }
    for x in model.reg_weights.iter() {
        w.write_f64::<LittleEndian>(*x)?;
    }
    for f in &model.faces {
        for &idx in f {
            w.write_u32::<LittleEndian>(idx)?;
        }
    }
    for &idx in &model.op_indices {
        w.write_u32::<LittleEndian>(idx)?;
    }
    for &idx in &model.lm68_indices {
        w.write_u32::<LittleEndian>(idx)?;
    }
    for &idx in &model.canthus_indices {
        w.write_u32::<LittleEndian>(idx)?;
    }
    Ok(())
}

fn read_binary(r: &mut impl Read) -> Result<MorphableModel> {
    let io_err = |e: std::io::Error| Error::Io {
        path: "<model>".into(),
        source: e,
    };
    let version = r.read_u32::<LittleEndian>().map_err(io_err)?;
    if version != FORMAT_VERSION {
        return Err(Error::model(
            "header",
            format!("unsupported container version {version}"),
        ));
    }
    let v = r.read_u32::<LittleEndian>().map_err(io_err)? as usize;
    let k = r.read_u32::<LittleEndian>().map_err(io_err)? as usize;
    let t = r.read_u32::<LittleEndian>().map_err(io_err)? as usize;
    if v == 0 {
        return Err(Error::model("header", "vertex count is zero"));
    }
    // 256 MiB of f64 payload, plenty for face models and a guard against
    // garbage headers.
    let payload = (3 * v * (k + 1) + k) as u64 * 8;
    if payload > 256 << 20 {
        return Err(Error::model(
            "header",
            format!("implausible dimensions V={v} K={k} T={t}"),
        ));
    }

    let mut read_f64s = |n: usize| -> Result<Vec<f64>> {
        let mut buf = vec![0f64; n];
        r.read_f64_into::<LittleEndian>(&mut buf).map_err(io_err)?;
        Ok(buf)
    };
    let mean = DMatrix::from_column_slice(3, v, &read_f64s(3 * v)?);
    let mut components = Vec::with_capacity(k);
    for _ in 0..k {
        components.push(DMatrix::from_column_slice(3, v, &read_f64s(3 * v)?));
    }
    let reg_weights = DVector::from_vec(read_f64s(k)?);

    let mut read_u32s = |n: usize| -> Result<Vec<u32>> {
        let mut buf = vec![0u32; n];
        r.read_u32_into::<LittleEndian>(&mut buf).map_err(io_err)?;
        Ok(buf)
    };
    let face_flat = read_u32s(3 * t)?;
    let faces: Vec<[u32; 3]> = face_flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    let op: [u32; 5] = read_u32s(5)?.try_into().unwrap();
    let lm68: [u32; 68] = read_u32s(68)?.try_into().unwrap();
    let canthus: [u32; 2] = read_u32s(2)?.try_into().unwrap();

    MorphableModel::new(mean, components, reg_weights, faces, op, lm68, canthus)
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    version: u32,
    mean_shape: Vec<f64>,
    components: Vec<Vec<f64>>,
    reg_weights: Vec<f64>,
    faces: Vec<[u32; 3]>,
    op_indices: Vec<u32>,
    lm68_indices: Vec<u32>,
    canthus_indices: Vec<u32>,
}

impl ModelJson {
    fn into_model(self) -> Result<MorphableModel> {
        if self.version != FORMAT_VERSION {
            return Err(Error::model(
                "header",
                format!("unsupported container version {}", self.version),
            ));
        }
        if self.mean_shape.len() % 3 != 0 || self.mean_shape.is_empty() {
            return Err(Error::model(
                "mean_shape",
                format!("length {} is not a positive multiple of 3", self.mean_shape.len()),
            ));
        }
        let v = self.mean_shape.len() / 3;
        let mean = DMatrix::from_column_slice(3, v, &self.mean_shape);
        let mut components = Vec::with_capacity(self.components.len());
        for (i, row) in self.components.iter().enumerate() {
            if row.len() != 3 * v {
                return Err(Error::model(
                    "components",
                    format!("component {i} has length {}, expected {}", row.len(), 3 * v),
                ));
            }
            components.push(DMatrix::from_column_slice(3, v, row));
        }
        let op: [u32; 5] = self
            .op_indices
            .as_slice()
            .try_into()
            .map_err(|_| Error::model("op_indices", format!("expected 5 entries, got {}", self.op_indices.len())))?;
        let lm68: [u32; 68] = self.lm68_indices.as_slice().try_into().map_err(|_| {
            Error::model(
                "lm68_indices",
                format!("expected 68 entries, got {}", self.lm68_indices.len()),
            )
        })?;
        let canthus: [u32; 2] = self.canthus_indices.as_slice().try_into().map_err(|_| {
            Error::model(
                "canthus_indices",
                format!("expected 2 entries, got {}", self.canthus_indices.len()),
            )
        })?;
        MorphableModel::new(
            mean,
            components,
            DVector::from_vec(self.reg_weights),
            self.faces,
            op,
            lm68,
            canthus,
        )
    }

    fn from_model(model: &MorphableModel) -> Self {
        ModelJson {
            version: FORMAT_VERSION,
            mean_shape: model.mean.as_slice().to_vec(),
            components: model.components.iter().map(|c| c.as_slice().to_vec()).collect(),
            reg_weights: model.reg_weights.iter().copied().collect(),
            faces: model.faces.clone(),
            op_indices: model.op_indices.to_vec(),
            lm68_indices: model.lm68_indices.to_vec(),
            canthus_indices: model.canthus_indices.to_vec(),
        }
    }
}

/// Writes the JSON container variant (used for small test models).
pub fn save_model_json(model: &MorphableModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    serde_json::to_writer(file, &ModelJson::from_model(model))?;
    Ok(())
}

// --- built-in test meshes ----------------------------------------------------

/// Smallest closed mesh: a regular tetrahedron with one radial component.
pub fn tetrahedron_model() -> MorphableModel {
    let verts = [
        [1.0, 1.0, 1.0],
        [1.0, -1.0, -1.0],
        [-1.0, 1.0, -1.0],
        [-1.0, -1.0, 1.0],
    ];
    let mut mean = DMatrix::zeros(3, 4);
    for (i, v) in verts.iter().enumerate() {
        mean.set_column(i, &Vector3::new(v[0], v[1], v[2]));
    }
    let component = mean.map(|x| 0.1 * x / 3f64.sqrt());
    let faces = vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]];
    let mut lm68 = [0u32; 68];
    for (i, slot) in lm68.iter_mut().enumerate() {
        *slot = (i % 4) as u32;
    }
    MorphableModel::new(
        mean,
        vec![component],
        DVector::from_element(1, 1.0),
        faces,
        [0, 1, 2, 3, 0],
        lm68,
        [0, 1],
    )
    .expect("tetrahedron model is valid")
}

/// Canonical miniature test model: a 73-vertex half-sphere facing +z with
/// marked eye, ear, nose and canthus vertices and four smooth deformation
/// components.
pub fn half_sphere_model() -> MorphableModel {
    dome_model(9, 8)
}

/// Dome (half-sphere) model with `rings x segments + 1` vertices.
///
/// The dome faces +z (toward the camera under an identity pose), x points
/// image-right and y image-down. Landmark sets are wired to the vertices
/// nearest canonical face-feature directions; requires `rings * segments + 1
/// >= 68`.
pub fn dome_model(rings: u32, segments: u32) -> MorphableModel {
    assert!(rings >= 4 && segments >= 6, "dome too coarse for landmark wiring");
    let v = (rings * segments + 1) as usize;
    assert!(v >= 68, "need at least 68 vertices for distinct landmarks");

    let mut mean = DMatrix::zeros(3, v);
    mean.set_column(0, &Vector3::new(0.0, 0.0, 1.0));
    for r in 1..=rings {
        let theta = (r as f64) * std::f64::consts::FRAC_PI_2 / (rings as f64);
        for s in 0..segments {
            let phi = (s as f64) * std::f64::consts::TAU / (segments as f64);
            let id = (1 + (r - 1) * segments + s) as usize;
            mean.set_column(
                id,
                &Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()),
            );
        }
    }

    let mut faces = Vec::new();
    for s in 0..segments {
        faces.push([0, 1 + s, 1 + (s + 1) % segments]);
    }
    for r in 1..rings {
        for s in 0..segments {
            let a = 1 + (r - 1) * segments + s;
            let b = 1 + r * segments + s;
            let c = 1 + r * segments + (s + 1) % segments;
            let d = 1 + (r - 1) * segments + (s + 1) % segments;
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    // Orient every triangle outward (radially, the dome is a unit-sphere patch).
    for f in &mut faces {
        let a = mean.column(f[0] as usize);
        let b = mean.column(f[1] as usize);
        let c = mean.column(f[2] as usize);
        let n = (b - a).cross(&(c - a));
        let centroid = (a + b + c) / 3.0;
        if n.dot(&centroid) < 0.0 {
            f.swap(1, 2);
        }
    }

    let nearest = |dir: Vector3<f64>| -> u32 {
        let dir = dir.normalize();
        let mut best = 0usize;
        let mut best_dot = f64::NEG_INFINITY;
        for (i, c) in mean.column_iter().enumerate() {
            let d = c.dot(&dir);
            if d > best_dot {
                best_dot = d;
                best = i;
            }
        }
        best as u32
    };

    // Feature directions: eyes sit above (negative y) and lateral of the nose
    // apex, canthi slightly lower and wider, ears on the rim.
    let nose = nearest(Vector3::new(0.0, 0.0, 1.0));
    let eye_l = nearest(Vector3::new(-0.25, -0.25, 0.93));
    let eye_r = nearest(Vector3::new(0.25, -0.25, 0.93));
    let ear_l = nearest(Vector3::new(-1.0, 0.0, 0.02));
    let ear_r = nearest(Vector3::new(1.0, 0.0, 0.02));
    let canthus_l = nearest(Vector3::new(-0.45, -0.45, 0.77));
    let canthus_r = nearest(Vector3::new(0.45, -0.45, 0.77));

    // Contour landmarks: the 17 vertices deepest down the dome (largest polar
    // angle), ordered by id for determinism; the rest fill the remaining slots.
    let mut by_theta: Vec<u32> = (0..v as u32).collect();
    by_theta.sort_by(|&a, &b| {
        let za = mean.column(a as usize)[2];
        let zb = mean.column(b as usize)[2];
        za.partial_cmp(&zb).unwrap().then(a.cmp(&b))
    });
    let contour: Vec<u32> = by_theta[..17].to_vec();
    let mut rest: Vec<u32> = (0..v as u32).filter(|i| !contour.contains(i)).collect();
    rest.truncate(51);
    let mut lm68_vec = contour;
    lm68_vec.extend_from_slice(&rest);
    debug_assert_eq!(lm68_vec.len(), 68);
    // Pin the inner-canthus landmark slots of the standard 68 configuration
    // to the marked canthus vertices.
    for (slot, target) in [(39usize, canthus_l), (42usize, canthus_r)] {
        let pos = lm68_vec.iter().position(|&x| x == target).expect("canthus vertex is a landmark");
        lm68_vec.swap(slot, pos);
    }
    let lm68: [u32; 68] = lm68_vec.try_into().unwrap();

    // Four smooth displacement fields: apex bulge, lateral stretch, vertical
    // stretch, brow bump.
    let apex_bulge = field(&mean, |p| {
        let theta = p[2].clamp(-1.0, 1.0).acos();
        let g = (-(theta / 25f64.to_radians()).powi(2)).exp();
        p * (0.25 * g)
    });
    let lateral = field(&mean, |p| Vector3::new(0.2 * p[0], 0.0, 0.0));
    let vertical = field(&mean, |p| Vector3::new(0.0, 0.2 * p[1], 0.0));
    let brow_dir = Vector3::new(0.0, -0.6, 0.8).normalize();
    let brow = field(&mean, |p| {
        let ang = p.normalize().dot(&brow_dir).clamp(-1.0, 1.0).acos();
        let g = (-(ang / 20f64.to_radians()).powi(2)).exp();
        p * (0.2 * g)
    });

    MorphableModel::new(
        mean,
        vec![apex_bulge, lateral, vertical, brow],
        DVector::from_vec(vec![1.0, 2.0, 4.0, 8.0]),
        faces,
        [eye_l, eye_r, nose, ear_l, ear_r],
        lm68,
        [canthus_l, canthus_r],
    )
    .expect("dome model is valid")
}

fn field(mean: &DMatrix<f64>, f: impl Fn(Vector3<f64>) -> Vector3<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(3, mean.ncols());
    for (i, c) in mean.column_iter().enumerate() {
        out.set_column(i, &f(c.into()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent shortest-path oracle: relaxes distances over the raw edge
    /// list until a fixed point, no adjacency structure involved.
    fn bfs_oracle(faces: &[[u32; 3]], v: usize, seed: u32, k: u32) -> Vec<u32> {
        let mut edges = Vec::new();
        for f in faces {
            edges.push((f[0], f[1]));
            edges.push((f[1], f[2]));
            edges.push((f[2], f[0]));
        }
        let mut dist = vec![u64::MAX; v];
        dist[seed as usize] = 0;
        loop {
            let mut changed = false;
            for &(a, b) in &edges {
                for (x, y) in [(a, b), (b, a)] {
                    if dist[x as usize] != u64::MAX && dist[x as usize] + 1 < dist[y as usize] {
                        dist[y as usize] = dist[x as usize] + 1;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        (0..v as u32).filter(|&i| dist[i as usize] <= k as u64).collect()
    }

    #[test]
    fn tetrahedron_loads_with_complete_adjacency() {
        let m = tetrahedron_model();
        assert_eq!(m.vertex_count(), 4);
        assert_eq!(m.component_count(), 1);
        for vtx in 0..4 {
            let mut nb = m.neighborhood().neighbors(vtx).to_vec();
            nb.sort_unstable();
            let expected: Vec<u32> = (0..4).filter(|&x| x != vtx).collect();
            assert_eq!(nb, expected);
        }
    }

    #[test]
    fn json_roundtrip_tetrahedron() {
        let m = tetrahedron_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tetra.json");
        save_model_json(&m, &path).unwrap();
        let m2 = load_model(&path).unwrap();
        assert_eq!(m2.vertex_count(), 4);
        assert_eq!(m2.component_count(), 1);
        assert_eq!(m.mean(), m2.mean());
    }

    #[test]
    fn binary_roundtrip_is_bit_exact() {
        let m = half_sphere_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dome.c3dm");
        save_model(&m, &path).unwrap();
        let m2 = load_model(&path).unwrap();
        let bits = |m: &MorphableModel| -> Vec<u64> {
            let mut out: Vec<u64> = m.mean().iter().map(|x| x.to_bits()).collect();
            for i in 0..m.component_count() {
                out.extend(m.component(i).iter().map(|x| x.to_bits()));
            }
            out.extend(m.reg_weights().iter().map(|x| x.to_bits()));
            out
        };
        assert_eq!(bits(&m), bits(&m2));
        assert_eq!(m.faces(), m2.faces());
        assert_eq!(m.op_indices(), m2.op_indices());
        assert_eq!(m.lm68_indices(), m2.lm68_indices());
        assert_eq!(m.canthus_indices(), m2.canthus_indices());
        // and the twice-loaded model round-trips to identical bytes
        let path2 = dir.path().join("dome2.c3dm");
        save_model(&m2, &path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn out_of_range_landmark_index_names_field() {
        let m = tetrahedron_model();
        let mut lm = *m.lm68_indices();
        lm[10] = 4; // == V
        let err = MorphableModel::new(
            m.mean().clone(),
            vec![m.component(0).clone()],
            m.reg_weights().clone(),
            m.faces().to_vec(),
            *m.op_indices(),
            lm,
            *m.canthus_indices(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("lm68_indices"), "{err}");
    }

    #[test]
    fn nonpositive_reg_weight_rejected() {
        let m = tetrahedron_model();
        let err = MorphableModel::new(
            m.mean().clone(),
            vec![m.component(0).clone()],
            DVector::from_element(1, 0.0),
            m.faces().to_vec(),
            *m.op_indices(),
            *m.lm68_indices(),
            *m.canthus_indices(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("reg_weights"), "{err}");
    }

    #[test]
    fn component_dimension_mismatch_rejected() {
        let m = tetrahedron_model();
        let err = MorphableModel::new(
            m.mean().clone(),
            vec![DMatrix::zeros(3, 3)],
            m.reg_weights().clone(),
            m.faces().to_vec(),
            *m.op_indices(),
            *m.lm68_indices(),
            *m.canthus_indices(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("components"), "{err}");
    }

    #[test]
    fn k_ring_zero_is_seed_only() {
        let m = half_sphere_model();
        assert_eq!(m.k_ring(17, 0).unwrap(), vec![17]);
    }

    #[test]
    fn k_ring_on_tetrahedron_covers_all() {
        let m = tetrahedron_model();
        let ring = m.k_ring(2, 1).unwrap();
        assert_eq!(ring, vec![0, 1, 2, 3]);
    }

    #[test]
    fn k_ring_matches_bfs_oracle() {
        let m = half_sphere_model();
        for eye in Eye::BOTH {
            let seed = m.canthus_vertex(eye);
            for k in 0..6 {
                let got = m.k_ring(seed, k).unwrap();
                let want = bfs_oracle(m.faces(), m.vertex_count(), seed, k);
                assert_eq!(got, want, "k={k}");
            }
        }
    }

    #[test]
    fn k_ring_is_monotone_and_saturates() {
        let m = half_sphere_model();
        let seed = m.canthus_vertex(Eye::Left);
        let mut prev = m.k_ring(seed, 0).unwrap();
        for k in 1..40 {
            let cur = m.k_ring(seed, k).unwrap();
            assert!(prev.iter().all(|v| cur.contains(v)), "ring {k} lost a vertex");
            prev = cur;
        }
        assert_eq!(prev.len(), m.vertex_count(), "large k covers the connected mesh");
    }

    #[test]
    fn k_ring_rejects_bad_seed() {
        let m = tetrahedron_model();
        assert!(m.k_ring(4, 1).is_err());
    }

    #[test]
    fn half_sphere_landmarks_are_distinct_and_pinned() {
        let m = half_sphere_model();
        assert_eq!(m.vertex_count(), 73);
        let mut lm = m.lm68_indices().to_vec();
        assert_eq!(m.lm68_indices()[39], m.canthus_vertex(Eye::Left));
        assert_eq!(m.lm68_indices()[42], m.canthus_vertex(Eye::Right));
        lm.sort_unstable();
        lm.dedup();
        assert_eq!(lm.len(), 68, "landmark indices are distinct");
        // canthi left/right match screen sides
        let l = m.mean().column(m.canthus_vertex(Eye::Left) as usize)[0];
        let r = m.mean().column(m.canthus_vertex(Eye::Right) as usize)[0];
        assert!(l < 0.0 && r > 0.0);
    }
}
