//! Finite-volume meshes with cell nu-masses and face mu-conductances.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::quad::QuadOptions;
use crate::weights::{weight_integral, Domain1D, WeightSpec};

/// Conductances below this are treated as underflow and the face is removed.
pub const CONDUCTANCE_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceKind {
    /// Ghost value zero across the face.
    Dirichlet,
    ZeroFlux,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradeEnds {
    /// Grade toward finite endpoints where either weight is singular or degenerate.
    #[default]
    Auto,
    None,
    Left,
    Right,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    /// `M + 1` increasing face positions.
    pub faces: Vec<f64>,
    pub centers: Vec<f64>,
    pub masses: Vec<f64>,
    /// `M + 1` conductances; entries 0 and M belong to the boundary faces
    /// and are zero for zero-flux faces.
    pub cond: Vec<f64>,
    pub left: FaceKind,
    pub right: FaceKind,
    pub grading: f64,
    pub graded_ends: (bool, bool),
    /// Positions of faces removed because their conductance underflowed.
    pub merged_faces: Vec<f64>,
    /// Cells whose exact nu-integral diverges and use midpoint masses.
    pub midpoint_mass_cells: Vec<usize>,
}

/// Everything needed to mesh an interval.
#[derive(Debug, Clone)]
pub struct MeshSpec<'a> {
    pub nu: &'a WeightSpec,
    pub mu: &'a WeightSpec,
    /// Weight domain; faces on its finite endpoints are true boundaries.
    pub domain: &'a Domain1D,
    /// Meshed span, finite.
    pub span: (f64, f64),
    pub left: FaceKind,
    pub right: FaceKind,
    pub cells: usize,
    pub gamma: f64,
    pub ends: GradeEnds,
}

fn map_face(s: f64, lo: f64, hi: f64, gamma: f64, ends: (bool, bool)) -> f64 {
    let w = hi - lo;
    match ends {
        (false, false) => lo + w * s,
        (true, false) => lo + w * s.powf(gamma),
        (false, true) => hi - w * (1.0 - s).powf(gamma),
        (true, true) => {
            if s <= 0.5 {
                lo + w * 0.5 * (2.0 * s).powf(gamma)
            } else {
                hi - w * 0.5 * (2.0 * (1.0 - s)).powf(gamma)
            }
        }
    }
}

impl Grid {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn span(&self) -> (f64, f64) {
        (self.faces[0], *self.faces.last().unwrap())
    }

    /// Smallest cell width.
    pub fn h_min(&self) -> f64 {
        self.faces
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn build(spec: &MeshSpec) -> Result<Grid> {
        let (lo, hi) = spec.span;
        let m = spec.cells;
        if m < 8 {
            return param("grid needs at least 8 cells");
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return param(format!("mesh span ({lo}, {hi}) must be finite and ordered"));
        }
        if !(spec.gamma >= 1.0) {
            return param("grading exponent must be >= 1");
        }
        let d = spec.domain;
        let at_left = lo == d.left;
        let at_right = hi == d.right;
        let ends = match spec.ends {
            GradeEnds::None => (false, false),
            GradeEnds::Left => (true, false),
            GradeEnds::Right => (false, true),
            GradeEnds::Both => (true, true),
            GradeEnds::Auto => {
                let (nl, nr) = spec.nu.singular_ends();
                let (ml, mr) = spec.mu.singular_ends();
                ((nl || ml) && at_left, (nr || mr) && at_right)
            }
        };
        let ends = if spec.gamma == 1.0 {
            (false, false)
        } else {
            ends
        };
        let mut faces: Vec<f64> = (0..=m)
            .map(|i| map_face(i as f64 / m as f64, lo, hi, spec.gamma, ends))
            .collect();
        faces[0] = lo;
        faces[m] = hi;
        if faces.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Numeric {
                location: "grid faces".into(),
                message: "grading collapsed cells; reduce gamma or cells".into(),
            });
        }

        let opts = QuadOptions::with_tol(1e-10);
        let mut masses = Vec::with_capacity(m);
        let mut midpoint_mass_cells = Vec::new();
        for i in 0..m {
            let (a, b) = (faces[i], faces[i + 1]);
            let v = weight_integral(spec.nu, 1.0, a, b, &opts)?;
            if v.is_finite() && v > 0.0 {
                masses.push(v);
            } else {
                let c = 0.5 * (a + b);
                masses.push(spec.nu.eval(c)? * (b - a));
                midpoint_mass_cells.push(i);
            }
        }

        let mut centers: Vec<f64> = faces.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let mut cond = vec![0.0; m + 1];
        for i in 1..m {
            cond[i] = spec.mu.ln_eval(faces[i])?.exp() / (centers[i] - centers[i - 1]);
        }
        let boundary = |kind: FaceKind, face: f64, center: f64, true_end: bool| -> Result<f64> {
            match kind {
                FaceKind::ZeroFlux => Ok(0.0),
                FaceKind::Dirichlet => {
                    // the boundary face itself may be a singular point of the weight
                    let at = if true_end {
                        0.5 * (face + center)
                    } else {
                        face
                    };
                    Ok(spec.mu.ln_eval(at)?.exp() / (center - face).abs())
                }
            }
        };
        cond[0] = boundary(spec.left, faces[0], centers[0], at_left)?;
        cond[m] = boundary(spec.right, faces[m], centers[m - 1], at_right)?;

        let mut merged_faces = Vec::new();
        let mut i = 1;
        while i < faces.len() - 1 {
            if cond[i] < CONDUCTANCE_FLOOR {
                merged_faces.push(faces[i]);
                masses[i - 1] += masses[i];
                masses.remove(i);
                faces.remove(i);
                cond.remove(i);
                centers.remove(i);
                centers[i - 1] = 0.5 * (faces[i - 1] + faces[i]);
                if i - 1 > 0 {
                    cond[i - 1] =
                        spec.mu.ln_eval(faces[i - 1])?.exp() / (centers[i - 1] - centers[i - 2]);
                }
                if i < faces.len() - 1 {
                    cond[i] = spec.mu.ln_eval(faces[i])?.exp() / (centers[i] - centers[i - 1]);
                }
            } else {
                i += 1;
            }
        }
        if centers.len() < 2 {
            return Err(Error::Numeric {
                location: format!("({lo}, {hi})"),
                message: "all faces merged by conductance underflow".into(),
            });
        }

        Ok(Grid {
            faces,
            centers,
            masses,
            cond,
            left: spec.left,
            right: spec.right,
            grading: spec.gamma,
            graded_ends: ends,
            merged_faces,
            midpoint_mass_cells,
        })
    }

    /// Copy with lengths scaled by `s` and masses by `mass_factor`.
    pub fn rescaled(&self, s: f64, mass_factor: f64) -> Grid {
        Grid {
            faces: self.faces.iter().map(|x| x * s).collect(),
            centers: self.centers.iter().map(|x| x * s).collect(),
            masses: self.masses.iter().map(|x| x * mass_factor).collect(),
            cond: self.cond.iter().map(|g| g / s).collect(),
            merged_faces: self.merged_faces.iter().map(|x| x * s).collect(),
            ..self.clone()
        }
    }
}
