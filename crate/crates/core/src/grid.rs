//! Frequency quadrature grids on (0, x_max].

use std::num::NonZeroUsize;

use gauss_quad::laguerre::GaussLaguerre;
use gauss_quad::legendre::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::bath::BathSpec;
use crate::error::{Error, Result};

/// Gauss-Legendre points per panel.
pub const DEFAULT_ORDER: usize = 16;
pub const DEFAULT_NODES: usize = 4000;
/// Largest phase an oscillating factor may sweep across one panel.
const PHASE_PER_PANEL: f64 = 6.0;
const MAX_PANEL_WIDTH: f64 = 0.5;
/// Past this frequency the weight is below e^-80 and panels grow geometrically.
const DENSE_LIMIT: f64 = 80.0;
const COMPOSITE_TOLERANCE: f64 = 1e-10;
const LAGUERRE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridScheme {
    /// Composite Gauss-Legendre panels, graded toward x = 0.
    CompositePanel,
    /// Gauss-Laguerre nodes with the e^-x factor folded back into the weights.
    ExponentialNode,
}

/// Knobs for [`FrequencyGrid::for_bath`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOptions {
    /// Minimum number of nodes.
    pub nodes: usize,
    /// Truncation frequency; defaults to `40 + 20θ + 4/dt_min`.
    pub x_max: Option<f64>,
    /// Largest angular rate (in x) of any oscillating factor, e.g. the longest time τ.
    pub max_rate: f64,
    /// Shortest pulse spacing, if any; widens the default truncation.
    pub dt_min: Option<f64>,
    pub order: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self { nodes: DEFAULT_NODES, x_max: None, max_rate: 0.0, dt_min: None, order: DEFAULT_ORDER }
    }
}

impl GridOptions {
    pub fn with_max_rate(mut self, rate: f64) -> Self {
        self.max_rate = rate;
        self
    }

    pub fn with_dt_min(mut self, dt: f64) -> Self {
        self.dt_min = Some(dt);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    x_max: f64,
    scheme: GridScheme,
    tolerance: f64,
    /// Panel edges (composite scheme only), kept for refinement.
    panels: Vec<(f64, f64)>,
    order: usize,
}

impl FrequencyGrid {
    /// Oscillation-aware composite grid for integrals against `bath`.
    pub fn for_bath(bath: &BathSpec, options: &GridOptions) -> Result<Self> {
        let x_max =
            options.x_max.unwrap_or_else(|| 40.0 + 20.0 * bath.theta() + options.dt_min.map_or(0.0, |dt| 4.0 / dt));
        if !(x_max > 0.0) || !x_max.is_finite() {
            return Err(Error::Grid(format!("x_max must be positive, got {x_max}")));
        }
        if options.order == 0 {
            return Err(Error::Grid("panel order must be ≥ 1".into()));
        }
        let dense_end = x_max.min(DENSE_LIMIT);
        let mut width = MAX_PANEL_WIDTH;
        if options.max_rate > 0.0 {
            width = width.min(PHASE_PER_PANEL / options.max_rate);
        }
        let by_count = (options.nodes as f64 / options.order as f64).ceil().max(1.0);
        width = width.min(dense_end / by_count);
        let n_dense = (dense_end / width).ceil() as usize;
        let width = dense_end / n_dense as f64;

        let mut panels = Vec::with_capacity(n_dense + 32);
        // geometric grading of the first panel toward zero, fine enough to
        // resolve the coth scale θ
        let mut levels = 4;
        if bath.theta() > 0.0 && width > bath.theta() {
            levels = levels.max((width / bath.theta()).log2().ceil() as usize + 2);
        }
        let levels = levels.min(48);
        let mut edge = width / f64::powi(2.0, levels as i32);
        panels.push((0.0, edge));
        while edge < width * (1.0 - 1e-12) {
            panels.push((edge, 2.0 * edge));
            edge *= 2.0;
        }
        for k in 1..n_dense {
            panels.push((k as f64 * width, (k + 1) as f64 * width));
        }
        let mut a = dense_end;
        while a < x_max {
            let b = (a + (0.25 * a).max(width)).min(x_max);
            panels.push((a, b));
            a = b;
        }
        Self::from_panels(panels, options.order, x_max)
    }

    /// Composite Gauss-Legendre rule on the given panels.
    pub fn from_panels(panels: Vec<(f64, f64)>, order: usize, x_max: f64) -> Result<Self> {
        let order_nz = NonZeroUsize::new(order).ok_or_else(|| Error::Grid("panel order must be ≥ 1".into()))?;
        let rule = GaussLegendre::new(order_nz);
        let mut nodes = Vec::with_capacity(panels.len() * order);
        let mut weights = Vec::with_capacity(panels.len() * order);
        for &(a, b) in &panels {
            if !(b > a) || a < 0.0 {
                return Err(Error::Grid(format!("invalid panel [{a}, {b}]")));
            }
            let half = 0.5 * (b - a);
            let mid = 0.5 * (b + a);
            // gauss-quad lists nodes in descending order
            let mut pairs: Vec<(f64, f64)> =
                rule.as_node_weight_pairs().iter().map(|&(t, w)| (mid + half * t, half * w)).collect();
            pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
            for (x, w) in pairs {
                nodes.push(x);
                weights.push(w);
            }
        }
        let grid = Self {
            nodes,
            weights,
            x_max,
            scheme: GridScheme::CompositePanel,
            tolerance: COMPOSITE_TOLERANCE,
            panels,
            order,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// `n`-point Gauss-Laguerre grid. Exact for polynomial×e^-x integrands
    /// of degree < 2n; unsuited to oscillatory or sharply varying factors.
    pub fn gauss_laguerre(n: usize) -> Result<Self> {
        let n_nz = NonZeroUsize::new(n).ok_or_else(|| Error::Grid("need at least one node".into()))?;
        if n > 160 {
            return Err(Error::Grid(format!("Gauss-Laguerre order {n} overflows the weight rescaling")));
        }
        let rule = GaussLaguerre::new(n_nz, 0.0.try_into().expect("alpha = 0 is valid"));
        let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().iter().map(|&(x, w)| (x, w * x.exp())).collect();
        pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
        let x_max = pairs.last().map(|p| p.0).unwrap_or(0.0);
        let (nodes, weights) = pairs.into_iter().unzip();
        let grid = Self {
            nodes,
            weights,
            x_max,
            scheme: GridScheme::ExponentialNode,
            tolerance: LAGUERRE_TOLERANCE,
            panels: Vec::new(),
            order: n,
        };
        grid.validate()?;
        Ok(grid)
    }

    fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Grid("grid has no nodes".into()));
        }
        if self.nodes[0] <= 0.0 {
            return Err(Error::Grid("nodes must be strictly positive".into()));
        }
        if self.nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Grid("nodes must be strictly increasing".into()));
        }
        if self.weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::Grid("weights must be positive and finite".into()));
        }
        if self.x_max < *self.nodes.last().unwrap() {
            return Err(Error::Grid("x_max lies below the last node".into()));
        }
        let mass = self.integrate(|x| (-x).exp());
        let expected = match self.scheme {
            GridScheme::CompositePanel => 1.0 - (-self.x_max).exp(),
            GridScheme::ExponentialNode => 1.0,
        };
        if (mass - expected).abs() > self.tolerance {
            return Err(Error::Grid(format!(
                "∫e^-x over the grid gives {mass}, off by more than {:e}",
                self.tolerance
            )));
        }
        Ok(())
    }

    /// Same grid with every panel split in two (or twice the Laguerre order).
    pub fn refined(&self) -> Self {
        match self.scheme {
            GridScheme::CompositePanel => {
                let panels = self
                    .panels
                    .iter()
                    .flat_map(|&(a, b)| {
                        let m = 0.5 * (a + b);
                        [(a, m), (m, b)]
                    })
                    .collect();
                Self::from_panels(panels, self.order, self.x_max).expect("refining a valid grid")
            }
            GridScheme::ExponentialNode => {
                Self::gauss_laguerre((2 * self.order).min(160)).expect("refining a valid grid")
            }
        }
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn scheme(&self) -> GridScheme {
        self.scheme
    }

    /// Accuracy the grid promises for smooth, resolved integrands.
    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }
}
