//! Node/target geometry: delays, Doppler, path geometry vectors and their
//! Jacobians with respect to the target position.

use crate::error::{Error, Result};
use crate::linalg::{Mat2, Matrix, Vec2};
use crate::scalar::Scalar;

/// Vacuum propagation speed [m/s].
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Target-to-node distance below which a geometry is rejected [m].
pub const DEGENERACY_DISTANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayoutMode {
    /// Every transmitter paired with every receiver.
    Multistatic,
    /// Colocated transmitter/receiver pairs.
    Monostatic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkLayout<T> {
    tx: Vec<Vec2<T>>,
    rx: Vec<Vec2<T>>,
    mode: LayoutMode,
    c: T,
}

impl<T: Scalar> NetworkLayout<T> {
    pub fn multistatic(tx: Vec<Vec2<T>>, rx: Vec<Vec2<T>>, c: T) -> Result<Self> {
        if tx.is_empty() || rx.is_empty() {
            return Err(Error::InvalidParameter(
                "layout needs at least one transmitter and one receiver".into(),
            ));
        }
        Self::checked(tx, rx, LayoutMode::Multistatic, c)
    }

    pub fn monostatic(nodes: Vec<Vec2<T>>, c: T) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidParameter("layout needs at least one base station".into()));
        }
        Self::checked(nodes.clone(), nodes, LayoutMode::Monostatic, c)
    }

    /// `n` monostatic nodes evenly spaced on a circle about the origin, the
    /// first at angle `phase` [rad].
    pub fn uniform_ring(n: usize, radius: T, phase: T, c: T) -> Result<Self> {
        let nodes = ring_points(n, radius, phase);
        Self::monostatic(nodes, c)
    }

    fn checked(tx: Vec<Vec2<T>>, rx: Vec<Vec2<T>>, mode: LayoutMode, c: T) -> Result<Self> {
        if !(c > T::zero()) || !c.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "propagation speed must be positive, got {c}"
            )));
        }
        if tx.iter().chain(rx.iter()).any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter("node positions must be finite".into()));
        }
        Ok(NetworkLayout { tx, rx, mode, c })
    }

    pub fn tx_positions(&self) -> &[Vec2<T>] {
        &self.tx
    }

    pub fn rx_positions(&self) -> &[Vec2<T>] {
        &self.rx
    }

    pub fn mode(&self) -> LayoutMode {
        self.mode
    }

    pub fn c(&self) -> T {
        self.c
    }

    pub fn path_count(&self) -> usize {
        match self.mode {
            LayoutMode::Multistatic => self.tx.len() * self.rx.len(),
            LayoutMode::Monostatic => self.tx.len(),
        }
    }

    /// (transmitter, receiver) index pairs in path order: k-major for
    /// multistatic layouts, node order for monostatic ones.
    pub fn path_pairs(&self) -> Vec<(usize, usize)> {
        match self.mode {
            LayoutMode::Multistatic => (0..self.tx.len())
                .flat_map(|k| (0..self.rx.len()).map(move |l| (k, l)))
                .collect(),
            LayoutMode::Monostatic => (0..self.tx.len()).map(|l| (l, l)).collect(),
        }
    }

    /// All distinct node positions (each colocated node once).
    pub fn nodes(&self) -> Vec<Vec2<T>> {
        match self.mode {
            LayoutMode::Monostatic => self.tx.clone(),
            LayoutMode::Multistatic => self.tx.iter().chain(self.rx.iter()).copied().collect(),
        }
    }

    /// The same layout rotated about the origin.
    pub fn rotated(&self, angle: T) -> Self {
        NetworkLayout {
            tx: self.tx.iter().map(|p| p.rotated(angle)).collect(),
            rx: self.rx.iter().map(|p| p.rotated(angle)).collect(),
            mode: self.mode,
            c: self.c,
        }
    }
}

/// Points evenly spaced on a circle about the origin.
pub fn ring_points<T: Scalar>(n: usize, radius: T, phase: T) -> Vec<Vec2<T>> {
    (0..n)
        .map(|i| {
            let angle = phase + T::two_pi() * T::count(i) / T::count(n);
            Vec2::new(radius * angle.cos(), radius * angle.sin())
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetState<T> {
    pub position: Vec2<T>,
    pub velocity: Vec2<T>,
}

impl<T: Scalar> TargetState<T> {
    pub fn new(position: Vec2<T>, velocity: Vec2<T>) -> Self {
        TargetState { position, velocity }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathGeometry<T> {
    /// Unit vector from the transmitter towards the target.
    pub u_t: Vec2<T>,
    /// Unit vector from the receiver towards the target.
    pub u_r: Vec2<T>,
    pub g: Vec2<T>,
    pub tau: T,
    pub range_t: T,
    pub range_r: T,
}

impl<T: Scalar> PathGeometry<T> {
    /// Radial (bistatic range-rate) speed gᵀv [m/s].
    pub fn radial_speed(&self, v: Vec2<T>) -> T {
        self.g.dot(v)
    }
}

fn line_of_sight<T: Scalar>(node: Vec2<T>, x: Vec2<T>, index: usize) -> Result<(Vec2<T>, T)> {
    let d = x - node;
    let range = d.norm();
    if !(range >= T::lit(DEGENERACY_DISTANCE)) {
        return Err(Error::DegenerateGeometry {
            node: index,
            distance: range.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok((d.scale(range.recip()), range))
}

pub fn path_geometries<T: Scalar>(layout: &NetworkLayout<T>, target: &TargetState<T>) -> Result<Vec<PathGeometry<T>>> {
    if !target.position.is_finite() || !target.velocity.is_finite() {
        return Err(Error::InvalidParameter("target state must be finite".into()));
    }
    let x = target.position;
    let tx = layout
        .tx
        .iter()
        .enumerate()
        .map(|(i, &p)| line_of_sight(p, x, i))
        .collect::<Result<Vec<_>>>()?;
    let rx = match layout.mode {
        LayoutMode::Monostatic => tx.clone(),
        LayoutMode::Multistatic => layout
            .rx
            .iter()
            .enumerate()
            .map(|(i, &p)| line_of_sight(p, x, layout.tx.len() + i))
            .collect::<Result<Vec<_>>>()?,
    };
    Ok(layout
        .path_pairs()
        .into_iter()
        .map(|(k, l)| {
            let (u_t, range_t) = tx[k];
            let (u_r, range_r) = rx[l];
            PathGeometry {
                u_t,
                u_r,
                g: u_t + u_r,
                tau: (range_t + range_r) / layout.c,
                range_t,
                range_r,
            }
        })
        .collect())
}

/// Doppler shift (f_c/c)·gᵀv [Hz] at carrier `f_c`.
pub fn doppler_shift<T: Scalar>(pg: &PathGeometry<T>, v: Vec2<T>, f_c: T, c: T) -> T {
    f_c / c * pg.radial_speed(v)
}

/// L×2 matrix of ∂τ/∂x, row ℓ equal to gᵀ/c.
pub fn delay_jacobian<T: Scalar>(layout: &NetworkLayout<T>, target: &TargetState<T>) -> Result<Matrix<T>> {
    let paths = path_geometries(layout, target)?;
    let c = layout.c;
    Ok(Matrix::from_fn(paths.len(), 2, |i, j| {
        let g = paths[i].g;
        (if j == 0 { g.x } else { g.y }) / c
    }))
}

/// ∂g/∂x = (I − u_t u_tᵀ)/R_t + (I − u_r u_rᵀ)/R_r.
pub fn geometry_gradient_jacobian<T: Scalar>(pg: &PathGeometry<T>) -> Result<Mat2<T>> {
    let projector = |u: Vec2<T>, range: T, node: usize| -> Result<Mat2<T>> {
        if !(range >= T::lit(DEGENERACY_DISTANCE)) {
            return Err(Error::DegenerateGeometry {
                node,
                distance: range.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok((Mat2::identity() - u.outer(u)).scale(range.recip()))
    };
    Ok(projector(pg.u_t, pg.range_t, 0)? + projector(pg.u_r, pg.range_r, 1)?)
}
