//! Truncated uniform lattice on the box `[-R, R]^d` with homogeneous Dirichlet
//! boundary, trapezoidal quadrature and a face-centred (staggered) gradient.
//!
//! The gradient lives on faces between neighbouring nodes. Face quadrature
//! weights are chosen so that the discrete divergence used by
//! [`crate::operators`] is exactly the negative adjoint of [`grad`] under
//! [`inner_l2`]; this is what makes the discrete operator the exact gradient
//! of the discrete energy.
//!
//! All reductions run sequentially in index order, so results are
//! bit-for-bit reproducible.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::weights::WeightField;

/// Boundary treatment of the truncated box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// `u = 0` on every boundary node.
    Dirichlet,
}

#[derive(Debug, Clone)]
pub struct Grid {
    dim: usize,
    half_width: f64,
    points: usize,
    spacing: f64,
    boundary: Boundary,
    node_weights: Arc<[f64]>,
    // per axis, indexed by the lower node of the face; 0 where no face exists
    face_weights: Arc<[Vec<f64>]>,
    interior: Arc<[bool]>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.points == other.points
            && self.half_width.to_bits() == other.half_width.to_bits()
    }
}

/// Builds the lattice with `m` points per axis on `[-half_width, half_width]^d`.
pub fn make_grid(d: usize, half_width: f64, m: usize) -> Result<Grid> {
    if !(1..=3).contains(&d) {
        return Err(Error::InvalidDimension(d));
    }
    if m < 3 {
        return Err(Error::TooFewPoints(m));
    }
    if !(half_width > 0.0) || !half_width.is_finite() {
        return Err(Error::param("r_dom", "must be positive and finite"));
    }
    let spacing = 2.0 * half_width / (m - 1) as f64;
    let len = m.pow(d as u32);
    let cell = spacing.powi(d as i32);

    let mut node_weights = vec![0.0; len];
    let mut interior = vec![false; len];
    let mut face_weights = vec![vec![0.0; len]; d];
    let mut multi = [0usize; 3];
    for idx in 0..len {
        unravel(idx, d, m, &mut multi);
        let on_edge = |k: usize| multi[k] == 0 || multi[k] == m - 1;
        let mut w = cell;
        let mut inside = true;
        for k in 0..d {
            if on_edge(k) {
                w *= 0.5;
                inside = false;
            }
        }
        node_weights[idx] = w;
        interior[idx] = inside;
        for axis in 0..d {
            if multi[axis] + 1 >= m {
                continue;
            }
            let mut fw = cell;
            for k in 0..d {
                if k != axis && on_edge(k) {
                    fw *= 0.5;
                }
            }
            face_weights[axis][idx] = fw;
        }
    }

    Ok(Grid {
        dim: d,
        half_width,
        points: m,
        spacing,
        boundary: Boundary::Dirichlet,
        node_weights: node_weights.into(),
        face_weights: face_weights.into(),
        interior: interior.into(),
    })
}

fn unravel(mut idx: usize, d: usize, m: usize, out: &mut [usize; 3]) {
    for k in (0..d).rev() {
        out[k] = idx % m;
        idx /= m;
    }
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Total number of nodes, `m^d`.
    pub fn len(&self) -> usize {
        self.node_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stride of `axis` in the row-major (last axis fastest) layout.
    pub fn stride(&self, axis: usize) -> usize {
        self.points.pow((self.dim - 1 - axis) as u32)
    }

    pub fn node_weights(&self) -> &[f64] {
        &self.node_weights
    }

    pub fn face_weights(&self, axis: usize) -> &[f64] {
        &self.face_weights[axis]
    }

    pub fn is_interior(&self, idx: usize) -> bool {
        self.interior[idx]
    }

    /// Coordinates of node `idx`; unused trailing entries are zero.
    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let mut multi = [0usize; 3];
        unravel(idx, self.dim, self.points, &mut multi);
        let mut x = [0.0; 3];
        for k in 0..self.dim {
            x[k] = -self.half_width + multi[k] as f64 * self.spacing;
        }
        x
    }

    /// Euclidean distance of node `idx` from the origin.
    pub fn radius(&self, idx: usize) -> f64 {
        let x = self.coords(idx);
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Box volume `(2R)^d`.
    pub fn volume(&self) -> f64 {
        (2.0 * self.half_width).powi(self.dim as i32)
    }

    fn check(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// A grid function; boundary nodes always hold zero.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    grid: Grid,
    values: Vec<f64>,
    time: Option<f64>,
}

impl State {
    pub fn zeros(grid: &Grid) -> Self {
        State {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
            time: None,
        }
    }

    /// Samples `f` at interior nodes; boundary nodes are set to zero.
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                if grid.is_interior(i) {
                    f(&grid.coords(i)[..grid.dim()])
                } else {
                    0.0
                }
            })
            .collect();
        State {
            grid: grid.clone(),
            values,
            time: None,
        }
    }

    /// Wraps raw node values, enforcing finiteness and the Dirichlet condition.
    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::param(
                "values",
                format!("expected {} entries, got {}", grid.len(), values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("state values"));
        }
        if (0..grid.len()).any(|i| !grid.is_interior(i) && values[i] != 0.0) {
            return Err(Error::param("values", "boundary nodes must hold 0"));
        }
        Ok(State {
            grid: grid.clone(),
            values,
            time: None,
        })
    }

    pub(crate) fn from_values_unchecked(grid: &Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        State {
            grid: grid.clone(),
            values,
            time: None,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub(crate) fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self) -> Option<f64> {
        self.time
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.time = Some(t);
        self
    }

    pub fn set_time(&mut self, t: Option<f64>) {
        self.time = t;
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, s: f64) -> State {
        State::from_values_unchecked(&self.grid, self.values.iter().map(|v| s * v).collect())
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: f64, other: &State) -> Result<State> {
        self.grid.check(&other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + s * b)
            .collect();
        Ok(State::from_values_unchecked(&self.grid, values))
    }

    pub fn sub(&self, other: &State) -> Result<State> {
        self.add_scaled(-1.0, other)
    }
}

/// Quadrature approximation of `∫ u v dx`.
pub fn inner_l2(u: &State, v: &State) -> Result<f64> {
    u.grid.check(&v.grid)?;
    Ok(dot_weighted(u.grid.node_weights(), &u.values, &v.values))
}

pub(crate) fn dot_weighted(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum()
}

pub fn norm_l2(u: &State) -> f64 {
    dot_weighted(u.grid.node_weights(), &u.values, &u.values).sqrt()
}

/// Discrete L² distance between two states.
pub fn dist_l2(u: &State, v: &State) -> Result<f64> {
    u.grid.check(&v.grid)?;
    let s: f64 = u
        .grid
        .node_weights()
        .iter()
        .zip(&u.values)
        .zip(&v.values)
        .map(|((w, a), b)| w * (a - b) * (a - b))
        .sum();
    Ok(s.sqrt())
}

pub fn norm_lp(u: &State, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::param("p", "norm exponent must be >= 1"));
    }
    Ok(lp_pow(u, p).powf(1.0 / p))
}

/// `‖u‖_{L^p}^p`.
pub fn lp_pow(u: &State, p: f64) -> f64 {
    u.grid
        .node_weights()
        .iter()
        .zip(&u.values)
        .map(|(w, v)| w * v.abs().powf(p))
        .sum()
}

/// Squared L² norm of `u` restricted to nodes with `|x| > radius`.
pub fn norm_l2_sq_outside(u: &State, radius: f64) -> f64 {
    let g = &u.grid;
    (0..g.len())
        .filter(|&i| g.radius(i) > radius)
        .map(|i| g.node_weights()[i] * u.values[i] * u.values[i])
        .sum()
}

/// Face-centred discrete gradient: one scalar per face and axis, indexed by
/// the face's lower node. Entries without a face are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceField {
    pub axes: Vec<Vec<f64>>,
}

pub fn grad(u: &State) -> FaceField {
    let g = &u.grid;
    let inv_h = 1.0 / g.spacing();
    let axes = (0..g.dim())
        .map(|axis| {
            let stride = g.stride(axis);
            let fw = g.face_weights(axis);
            (0..g.len())
                .map(|i| {
                    if fw[i] > 0.0 {
                        (u.values[i + stride] - u.values[i]) * inv_h
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    FaceField { axes }
}

/// Gradient and potential contributions to `‖u‖_{E}^p`, returned separately.
pub fn e_norm_parts(u: &State, weight: &[f64], p: f64) -> (f64, f64) {
    let g = &u.grid;
    let gu = grad(u);
    let mut grad_part = 0.0;
    for axis in 0..g.dim() {
        grad_part += g
            .face_weights(axis)
            .iter()
            .zip(&gu.axes[axis])
            .map(|(w, d)| w * d.abs().powf(p))
            .sum::<f64>();
    }
    let pot_part = g
        .node_weights()
        .iter()
        .zip(weight)
        .zip(&u.values)
        .map(|((w, a), v)| w * a * v.abs().powf(p))
        .sum();
    (grad_part, pot_part)
}

/// `‖u‖_{E}^p = Σ_faces |∇u|^p + Σ_nodes a |u|^p` (with quadrature weights).
pub fn e_norm_pow(u: &State, w: &WeightField, p: f64) -> Result<f64> {
    u.grid.check(w.grid())?;
    let (a, b) = e_norm_parts(u, w.values(), p);
    Ok(a + b)
}

pub fn norm_e(u: &State, w: &WeightField, p: f64) -> Result<f64> {
    if !(p > 2.0) {
        return Err(Error::param("p", "must exceed 2"));
    }
    Ok(e_norm_pow(u, w, p)?.powf(1.0 / p))
}

/// Writes a state snapshot: a short text header followed by one value per
/// line at 17 significant digits, row-major.
pub fn write_snapshot(u: &State, mut out: impl Write) -> Result<()> {
    let g = &u.grid;
    let mut s = String::new();
    writeln!(s, "d {}", g.dim()).ok();
    writeln!(s, "r_dom {:.16e}", g.half_width()).ok();
    writeln!(s, "m {}", g.points_per_axis()).ok();
    match u.time {
        Some(t) => writeln!(s, "time_tag {t:.16e}").ok(),
        None => writeln!(s, "time_tag none").ok(),
    };
    for v in &u.values {
        writeln!(s, "{v:.16e}").ok();
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}

pub fn read_snapshot(input: impl BufRead) -> Result<State> {
    let mut lines = input.lines();
    let mut header = |key: &str| -> Result<String> {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("missing header `{key}`")))??;
        let mut it = line.split_whitespace();
        match (it.next(), it.next()) {
            (Some(k), Some(v)) if k == key => Ok(v.to_string()),
            _ => Err(Error::Parse(format!(
                "expected `{key} <value>`, got `{line}`"
            ))),
        }
    };
    let num = |s: String| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|e| Error::Parse(format!("`{s}`: {e}")))
    };
    let int = |s: String| -> Result<usize> {
        s.parse::<usize>()
            .map_err(|e| Error::Parse(format!("`{s}`: {e}")))
    };
    let d = int(header("d")?)?;
    let r = num(header("r_dom")?)?;
    let m = int(header("m")?)?;
    let tag = header("time_tag")?;
    let time = if tag == "none" { None } else { Some(num(tag)?) };
    let grid = make_grid(d, r, m)?;
    let values = lines
        .filter_map(|l| match l {
            Ok(l) if l.trim().is_empty() => None,
            other => Some(other),
        })
        .map(|l| {
            let l = l?;
            l.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("`{l}`: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut state = State::from_values(&grid, values)?;
    state.time = time;
    Ok(state)
}

pub fn save_snapshot(u: &State, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_snapshot(u, std::io::BufWriter::new(f))
}

pub fn load_snapshot(path: &Path) -> Result<State> {
    let f = std::fs::File::open(path)?;
    read_snapshot(std::io::BufReader::new(f))
}
