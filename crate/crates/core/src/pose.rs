//! Orthographic camera estimation from 2D-3D keypoint correspondences,
//! rotation extraction and Euler angle conversions.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use nalgebra::{DMatrix, DVector, Matrix3, RowVector3, SMatrix, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest are treated as zero
/// when pseudo-inverting the landmark matrix.
const PINV_REL_TOL: f64 = 1e-10;

/// Row condition number above which the affine matrix is considered a
/// degenerate (edge-on) view.
const MAX_CONDITION: f64 = 1e8;

/// Semantic tags of the 5-point detector output, in the canonical order
/// matching the model's head keypoint indices.
pub const KEYPOINT_LABELS_5: [&str; 5] = ["eye_l", "eye_r", "nose", "ear_l", "ear_r"];

/// Sparse 2D keypoints in pixel coordinates (origin top-left, y down).
///
/// Either the 5 head keypoints (labeled) or a 68-landmark set in the
/// standard ordering (`labels = None`).
#[derive(Debug, Clone)]
pub struct Keypoints2D {
    points: DMatrix<f64>,
    labels: Option<Vec<String>>,
    confidence: DVector<f64>,
}

#[derive(Serialize, Deserialize)]
struct KeypointsJson {
    n: usize,
    points: Vec<[f64; 2]>,
    labels: Option<Vec<String>>,
    confidence: Option<Vec<f64>>,
}

impl Keypoints2D {
    pub fn new(
        points: DMatrix<f64>,
        labels: Option<Vec<String>>,
        confidence: Option<DVector<f64>>,
    ) -> Result<Self> {
        if points.nrows() != 2 {
            return Err(Error::invalid(format!(
                "keypoints must be a 2xN matrix, got {}x{}",
                points.nrows(),
                points.ncols()
            )));
        }
        let n = points.ncols();
        if n != 5 && n != 68 {
            return Err(Error::invalid(format!("expected 5 or 68 keypoints, got {n}")));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("keypoint coordinates must be finite"));
        }
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(Error::invalid(format!(
                    "{} labels for {n} points",
                    labels.len()
                )));
            }
            let mut seen = labels.clone();
            seen.sort();
            seen.dedup();
            if seen.len() != n {
                return Err(Error::invalid("keypoint labels must be unique"));
            }
            if n == 5 {
                for l in labels {
                    if !KEYPOINT_LABELS_5.contains(&l.as_str()) {
                        return Err(Error::invalid(format!("unknown keypoint label `{l}`")));
                    }
                }
            }
        }
        let confidence = match confidence {
            Some(c) => {
                if c.len() != n {
                    return Err(Error::invalid(format!(
                        "{} confidence values for {n} points",
                        c.len()
                    )));
                }
                if c.iter().any(|x| !(0.0..=1.0).contains(x)) {
                    return Err(Error::invalid("confidence values must lie in [0, 1]"));
                }
                c
            }
            None => DVector::from_element(n, 1.0),
        };
        Ok(Keypoints2D {
            points,
            labels,
            confidence,
        })
    }

    pub fn len(&self) -> usize {
        self.points.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.points.ncols() == 0
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn point(&self, i: usize) -> Vector2<f64> {
        Vector2::new(self.points[(0, i)], self.points[(1, i)])
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn confidence(&self) -> &DVector<f64> {
        &self.confidence
    }

    /// Reorders a 5-point set into the canonical label order; identity when
    /// labels are absent (canonical order assumed).
    pub fn canonical_order(&self) -> Result<Keypoints2D> {
        if self.len() != 5 {
            return Ok(self.clone());
        }
        let Some(labels) = &self.labels else {
            return Ok(self.clone());
        };
        let mut points = DMatrix::zeros(2, 5);
        let mut confidence = DVector::zeros(5);
        for (slot, want) in KEYPOINT_LABELS_5.iter().enumerate() {
            let src = labels
                .iter()
                .position(|l| l == want)
                .ok_or_else(|| Error::invalid(format!("missing keypoint label `{want}`")))?;
            points.set_column(slot, &self.points.column(src));
            confidence[slot] = self.confidence[src];
        }
        Ok(Keypoints2D {
            points,
            labels: Some(KEYPOINT_LABELS_5.iter().map(|s| s.to_string()).collect()),
            confidence,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        let json: KeypointsJson = serde_json::from_reader(file)?;
        if json.points.len() != json.n {
            return Err(Error::invalid(format!(
                "keypoint file declares n={} but has {} points",
                json.n,
                json.points.len()
            )));
        }
        let mut points = DMatrix::zeros(2, json.n);
        for (i, p) in json.points.iter().enumerate() {
            points[(0, i)] = p[0];
            points[(1, i)] = p[1];
        }
        Keypoints2D::new(
            points,
            json.labels,
            json.confidence.map(DVector::from_vec),
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = KeypointsJson {
            n: self.len(),
            points: (0..self.len())
                .map(|i| [self.points[(0, i)], self.points[(1, i)]])
                .collect(),
            labels: self.labels.clone(),
            confidence: Some(self.confidence.iter().copied().collect()),
        };
        let file = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        serde_json::to_writer_pretty(file, &json)?;
        Ok(())
    }
}

/// Orthographic camera: 2x3 affine matrix plus image translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineProjection {
    pub a: SMatrix<f64, 2, 3>,
    pub t: Vector2<f64>,
}

impl AffineProjection {
    pub fn new(a: SMatrix<f64, 2, 3>, t: Vector2<f64>) -> Self {
        AffineProjection { a, t }
    }

    /// Projects a 3xM point matrix to 2xM pixel coordinates.
    pub fn project(&self, points: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = &self.a * points;
        for mut col in out.column_iter_mut() {
            col += self.t;
        }
        out
    }

    pub fn project_point(&self, p: &Vector3<f64>) -> Vector2<f64> {
        self.a * p + self.t
    }
}

/// Euler angles in degrees: pitch about x, yaw about y, roll about z,
/// composed as `R = Rx(pitch) * Ry(yaw) * Rz(roll)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerAngles {
    pub pitch: f64,
    pub yaw: f64,
    pub roll: f64,
}

/// Rotation, uniform scale and Euler angles recovered from an affine camera.
#[derive(Debug, Clone)]
pub struct HeadPose {
    pub rotation: Matrix3<f64>,
    pub scale: f64,
    pub euler: EulerAngles,
}

/// Least-squares affine camera from 2D-3D correspondences.
///
/// Both point sets are mean-centered before solving, the translation is
/// recovered from the means, and keypoints below `confidence_threshold` are
/// dropped (at least 4 must remain).
pub fn estimate_affine(
    keypoints: &Keypoints2D,
    points3: &DMatrix<f64>,
    confidence_threshold: f64,
) -> Result<AffineProjection> {
    if points3.nrows() != 3 || points3.ncols() != keypoints.len() {
        return Err(Error::invalid(format!(
            "3D landmark matrix is {}x{}, expected 3x{}",
            points3.nrows(),
            points3.ncols(),
            keypoints.len()
        )));
    }
    let keep: Vec<usize> = (0..keypoints.len())
        .filter(|&i| keypoints.confidence()[i] >= confidence_threshold)
        .collect();
    if keep.len() < 4 {
        return Err(Error::invalid(format!(
            "{} keypoints above confidence threshold {confidence_threshold}, need at least 4",
            keep.len()
        )));
    }
    let n = keep.len();
    let mut l2 = DMatrix::zeros(2, n);
    let mut l3 = DMatrix::zeros(3, n);
    for (j, &i) in keep.iter().enumerate() {
        l2.set_column(j, &keypoints.points().column(i));
        l3.set_column(j, &points3.column(i));
    }
    let mean2 = l2.column_mean();
    let mean3 = l3.column_mean();
    let mut l2c = l2;
    let mut l3c = l3;
    for j in 0..n {
        for i in 0..2 {
            l2c[(i, j)] -= mean2[i];
        }
        for i in 0..3 {
            l3c[(i, j)] -= mean3[i];
        }
    }

    let svd = l3c.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > PINV_REL_TOL * sigma_max)
        .count();
    if rank < 2 {
        return Err(Error::degenerate(
            "pose",
            "3D landmarks are collinear or coincident",
        ));
    }
    let pinv = svd
        .pseudo_inverse(PINV_REL_TOL * sigma_max)
        .map_err(|e| Error::degenerate("pose", e))?;
    let a_dyn = l2c * pinv;
    let a = SMatrix::<f64, 2, 3>::from_iterator(a_dyn.iter().copied());
    let t = Vector2::new(mean2[0], mean2[1]) - a * Vector3::new(mean3[0], mean3[1], mean3[2]);
    Ok(AffineProjection::new(a, t))
}

/// Extracts rotation, scale and Euler angles from the affine camera matrix.
///
/// The two rows of `A` are orthonormalized (Gram-Schmidt), the third row is
/// their cross product, and the scale is the mean row norm.
pub fn decompose_rotation(a: &SMatrix<f64, 2, 3>) -> Result<HeadPose> {
    let r0: Vector3<f64> = a.row(0).transpose();
    let r1: Vector3<f64> = a.row(1).transpose();
    let n0 = r0.norm();
    let n1 = r1.norm();
    if n0 == 0.0 || n1 == 0.0 {
        return Err(Error::degenerate("pose", "affine matrix has a zero row"));
    }
    let svd = a.svd(false, false);
    let smin = svd.singular_values.min();
    let smax = svd.singular_values.max();
    if smin <= 0.0 || smax / smin > MAX_CONDITION {
        return Err(Error::degenerate(
            "pose",
            "affine rows are nearly parallel (degenerate view)",
        ));
    }
    let scale = 0.5 * (n0 + n1);
    let u0 = r0 / n0;
    let mut u1 = r1 - u0 * r1.dot(&u0);
    u1 /= u1.norm();
    let u2 = u0.cross(&u1);
    let mut rotation = Matrix3::zeros();
    rotation.set_row(0, &RowVector3::new(u0.x, u0.y, u0.z));
    rotation.set_row(1, &RowVector3::new(u1.x, u1.y, u1.z));
    rotation.set_row(2, &RowVector3::new(u2.x, u2.y, u2.z));
    if rotation.determinant() < 0.0 {
        // Unreachable with u2 = u0 x u1, kept as a guard for det(R) = +1.
        rotation.set_row(2, &RowVector3::new(-u2.x, -u2.y, -u2.z));
    }
    debug_assert!((rotation.determinant() - 1.0).abs() < 1e-9);
    let euler = euler_from_rotation(&rotation);
    Ok(HeadPose {
        rotation,
        scale,
        euler,
    })
}

/// Euler angles (degrees) of a rotation matrix under the
/// `R = Rx(pitch) * Ry(yaw) * Rz(roll)` convention.
///
/// Yaw is clamped to [-90, 90]. At gimbal lock (|yaw| = 90) roll is set to
/// zero and pitch absorbs the in-plane component.
pub fn euler_from_rotation(r: &Matrix3<f64>) -> EulerAngles {
    let sy = r[(0, 2)].clamp(-1.0, 1.0);
    let yaw = sy.asin();
    let (pitch, roll) = if sy.abs() < 1.0 - 1e-12 {
        (
            (-r[(1, 2)]).atan2(r[(2, 2)]),
            (-r[(0, 1)]).atan2(r[(0, 0)]),
        )
    } else {
        let p = r[(1, 0)].atan2(r[(1, 1)]);
        (if sy > 0.0 { p } else { -p }, 0.0)
    };
    EulerAngles {
        pitch: pitch.to_degrees(),
        yaw: yaw.to_degrees(),
        roll: roll.to_degrees(),
    }
}

/// Rotation matrix for Euler angles in degrees, `Rx(pitch)*Ry(yaw)*Rz(roll)`.
pub fn rotation_from_euler(e: &EulerAngles) -> Matrix3<f64> {
    let (sa, ca) = e.pitch.to_radians().sin_cos();
    let (sb, cb) = e.yaw.to_radians().sin_cos();
    let (sg, cg) = e.roll.to_radians().sin_cos();
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, ca, -sa, 0.0, sa, ca);
    let ry = Matrix3::new(cb, 0.0, sb, 0.0, 1.0, 0.0, -sb, 0.0, cb);
    let rz = Matrix3::new(cg, -sg, 0.0, sg, cg, 0.0, 0.0, 0.0, 1.0);
    rx * ry * rz
}
