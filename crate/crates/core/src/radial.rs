//! Radial discretization of functions on `ℝ^N`.
//!
//! A [`RadialGrid`] carries nodes `0 = r_0 < … < r_{n−1} = r_max` together with
//! two sets of quadrature data against the measure `ω_{N−1} r^{N−1} dr`:
//!
//! * node weights `w_i = ω ∫ φ_i(r) r^{N−1} dr`, where `φ_i` is the Lagrange
//!   basis of a piecewise quadratic interpolant on consecutive cell pairs
//!   (falling back to piecewise linear on a cell wherever a pair would give a
//!   nonpositive weight, which happens only next to the origin). Moments are
//!   exact, weights are nonnegative and constants integrate exactly;
//! * cell measures `c_k = ω ∫_{r_k}^{r_{k+1}} r^{N−1} dr` used for quantities
//!   living on cell midpoints (derivatives).
//!
//! Functions are zero-extended beyond `r_max`.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_NODES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "ratio", rename_all = "lowercase")]
pub enum Spacing {
    Uniform,
    /// Consecutive cell widths grow by this ratio (> 1).
    Geometric(f64),
}

impl fmt::Display for Spacing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Spacing::Uniform => f.write_str("uniform"),
            Spacing::Geometric(ratio) => write!(f, "geometric:{ratio}"),
        }
    }
}

impl FromStr for Spacing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "uniform" {
            return Ok(Spacing::Uniform);
        }
        if let Some(rest) = s.strip_prefix("geometric:") {
            let ratio: f64 = rest
                .parse()
                .map_err(|_| Error::Parse(format!("bad geometric ratio {rest:?}")))?;
            return Ok(Spacing::Geometric(ratio));
        }
        Err(Error::Parse(format!("unknown spacing tag {s:?}")))
    }
}

/// Surface measure of the unit sphere `S^{N−1}` in `ℝ^N` (`ω₀ = 2`).
pub fn unit_sphere_measure(dim: usize) -> f64 {
    use std::f64::consts::PI;
    let mut omega = if dim % 2 == 1 { 2.0 } else { 2.0 * PI };
    let mut k = if dim % 2 == 1 { 1 } else { 2 };
    while k < dim {
        omega *= 2.0 * PI / k as f64;
        k += 2;
    }
    omega
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
fn gauss_legendre_unit(points: usize) -> Vec<(f64, f64)> {
    use std::f64::consts::PI;
    let n = points;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push(((1.0 - x) / 2.0, w / 2.0));
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadialGrid {
    dim: usize,
    r_max: f64,
    spacing: Spacing,
    omega: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    cells: Vec<f64>,
}

impl RadialGrid {
    pub fn new(dim: usize, r_max: f64, n: usize, spacing: Spacing) -> Result<Self> {
        if dim < 1 {
            return Err(Error::InvalidParams("N must be at least 1".into()));
        }
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(Error::InvalidParams(format!("r_max must be positive, got {r_max}")));
        }
        if n < MIN_NODES {
            return Err(Error::InvalidParams(format!("grid needs at least {MIN_NODES} nodes")));
        }
        let nodes: Vec<f64> = match spacing {
            Spacing::Uniform => (0..n).map(|i| r_max * i as f64 / (n - 1) as f64).collect(),
            Spacing::Geometric(ratio) => {
                if !(ratio.is_finite() && ratio > 1.0) {
                    return Err(Error::InvalidParams(format!(
                        "geometric ratio must exceed 1, got {ratio}"
                    )));
                }
                let total = (ratio.powi(n as i32 - 1) - 1.0) / (ratio - 1.0);
                let h0 = r_max / total;
                let mut nodes = Vec::with_capacity(n);
                let mut r = 0.0;
                let mut h = h0;
                for _ in 0..n {
                    nodes.push(r);
                    r += h;
                    h *= ratio;
                }
                nodes[n - 1] = r_max;
                nodes
            }
        };
        Self::from_nodes(dim, nodes, spacing)
    }

    pub fn uniform(dim: usize, r_max: f64, n: usize) -> Result<Self> {
        Self::new(dim, r_max, n, Spacing::Uniform)
    }

    fn from_nodes(dim: usize, mut nodes: Vec<f64>, spacing: Spacing) -> Result<Self> {
        let n = nodes.len();
        let r_max = *nodes.last().expect("nonempty");
        nodes[0] = 0.0;
        nodes[n - 1] = r_max;
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParams("grid nodes must be strictly increasing".into()));
        }
        let omega = unit_sphere_measure(dim);
        let gl = gauss_legendre_unit(dim / 2 + 2);
        let moments = |a: f64, b: f64, basis: &dyn Fn(f64) -> f64| -> f64 {
            let h = b - a;
            gl.iter()
                .map(|&(t, wt)| {
                    let r = a + t * h;
                    basis(r) * r.powi(dim as i32 - 1) * wt * h
                })
                .sum::<f64>()
                * omega
        };
        let cells: Vec<f64> = (0..n - 1)
            .map(|k| moments(nodes[k], nodes[k + 1], &|_| 1.0))
            .collect();
        let mut weights = vec![0.0; n];
        let mut k = 0;
        while k < n - 1 {
            if k + 2 < n {
                let (x0, x1, x2) = (nodes[k], nodes[k + 1], nodes[k + 2]);
                let lag = |xa: f64, xb: f64, xc: f64| move |r: f64| (r - xb) * (r - xc) / ((xa - xb) * (xa - xc));
                let w: Vec<f64> = [lag(x0, x1, x2), lag(x1, x0, x2), lag(x2, x0, x1)]
                    .iter()
                    .map(|l| moments(x0, x1, l) + moments(x1, x2, l))
                    .collect();
                if w.iter().all(|&x| x > 0.0) {
                    for (j, wj) in w.iter().enumerate() {
                        weights[k + j] += wj;
                    }
                    k += 2;
                    continue;
                }
            }
            let (a, b) = (nodes[k], nodes[k + 1]);
            weights[k] += moments(a, b, &|r| (b - r) / (b - a));
            weights[k + 1] += moments(a, b, &|r| (r - a) / (b - a));
            k += 1;
        }
        Ok(RadialGrid { dim, r_max, spacing, omega, nodes, weights, cells })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Node quadrature weights, including the factor `ω_{N−1}`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Cell measures `ω ∫_{cell} r^{N−1} dr`, one per cell.
    pub fn cell_measures(&self) -> &[f64] {
        &self.cells
    }

    pub fn cell_width(&self, k: usize) -> f64 {
        self.nodes[k + 1] - self.nodes[k]
    }

    /// `ω_{N−1} r_max^N / N`, the volume of the truncation ball.
    pub fn ball_volume(&self) -> f64 {
        self.omega * self.r_max.powi(self.dim as i32) / self.dim as f64
    }

    pub fn header(&self) -> String {
        format!(
            "# N={} r_max={} n={} spacing={}",
            self.dim,
            self.r_max,
            self.len(),
            self.spacing
        )
    }

    /// Index `k` of the cell `[r_k, r_{k+1})` containing `r` (clamped).
    pub fn locate(&self, r: f64) -> usize {
        let idx = self.nodes.partition_point(|&x| x <= r);
        idx.saturating_sub(1).min(self.len() - 2)
    }
}

/// A radial function sampled on the nodes of a shared grid.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialFn {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl RadialFn {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        check_finite(&grid, &values)?;
        Ok(RadialFn { grid, values })
    }

    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self::new(grid, values)
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let n = grid.len();
        RadialFn { grid, values: vec![0.0; n] }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Same grid, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.grid.clone(), values)
    }

    pub fn scaled(&self, c: f64) -> Self {
        RadialFn {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Staggered derivative `(u_{k+1} − u_k)/(r_{k+1} − r_k)`, one value per cell.
    pub fn derivative(&self) -> Vec<f64> {
        let r = self.grid.nodes();
        self.values
            .windows(2)
            .zip(r.windows(2))
            .map(|(u, r)| (u[1] - u[0]) / (r[1] - r[0]))
            .collect()
    }

    pub fn mass(&self) -> f64 {
        self.values
            .iter()
            .zip(self.grid.weights())
            .map(|(u, w)| w * u * u)
            .sum()
    }

    /// Cubic interpolation at an arbitrary radius, even across the origin and
    /// zero beyond `r_max`.
    pub fn eval(&self, r: f64) -> f64 {
        let r = r.abs();
        let grid = &*self.grid;
        if r > grid.r_max() {
            return 0.0;
        }
        let nodes = grid.nodes();
        let n = nodes.len();
        let k = grid.locate(r);
        let mut xs = [0.0; 4];
        let mut ys = [0.0; 4];
        for (slot, j) in (k as isize - 1..=k as isize + 2).enumerate() {
            let (x, y) = if j < 0 {
                (-nodes[(-j) as usize], self.values[(-j) as usize])
            } else if j as usize >= n {
                let over = j as usize - (n - 1);
                (nodes[n - 1] + (nodes[n - 1] - nodes[n - 1 - over]), 0.0)
            } else {
                (nodes[j as usize], self.values[j as usize])
            };
            xs[slot] = x;
            ys[slot] = y;
        }
        let mut acc = 0.0;
        for i in 0..4 {
            let mut basis = 1.0;
            for j in 0..4 {
                if i != j {
                    basis *= (r - xs[j]) / (xs[i] - xs[j]);
                }
            }
            acc += basis * ys[i];
        }
        acc
    }

    /// `|u(r_max)| < 1e−6 · max|u|`; otherwise the truncation radius is too small.
    pub fn decayed_at_boundary(&self) -> bool {
        let last = self.values.last().copied().unwrap_or(0.0).abs();
        last <= 1e-6 * self.max_abs()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", self.grid.header())?;
        for (r, v) in self.grid.nodes().iter().zip(&self.values) {
            writeln!(out, "{r:?},{v:?}")?;
        }
        Ok(())
    }

    /// Reads the two-column format written by [`RadialFn::write_csv`] and
    /// rebuilds the grid from its header.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty input".into()))??;
        let header = header
            .strip_prefix('#')
            .ok_or_else(|| Error::Parse("missing '#' header line".into()))?;
        let (mut dim, mut r_max, mut n, mut spacing) = (None, None, None, None);
        for field in header.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad header field {field:?}")))?;
            let bad = |_| Error::Parse(format!("bad header value {field:?}"));
            match key {
                "N" => dim = Some(value.parse::<usize>().map_err(|_| bad(()))?),
                "r_max" => r_max = Some(value.parse::<f64>().map_err(|_| bad(()))?),
                "n" => n = Some(value.parse::<usize>().map_err(|_| bad(()))?),
                "spacing" => spacing = Some(value.parse::<Spacing>()?),
                _ => return Err(Error::Parse(format!("unknown header key {key:?}"))),
            }
        }
        let missing = |k: &str| Error::Parse(format!("header is missing {k}"));
        let grid = RadialGrid::new(
            dim.ok_or_else(|| missing("N"))?,
            r_max.ok_or_else(|| missing("r_max"))?,
            n.ok_or_else(|| missing("n"))?,
            spacing.ok_or_else(|| missing("spacing"))?,
        )?;
        let mut values = Vec::with_capacity(grid.len());
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (_, v) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("bad row {line:?}")))?;
            values.push(
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad value in row {line:?}")))?,
            );
        }
        RadialFn::new(Arc::new(grid), values)
    }
}

fn check_finite(grid: &RadialGrid, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index, r: grid.nodes()[index] }),
        None => Ok(()),
    }
}

/// `ω ∑ w_i f(r_i)`: the integral over `ℝ^N` of the radial integrand `f`.
pub fn integrate(f: &RadialFn) -> Result<f64> {
    integrate_values(f.grid(), f.values())
}

pub fn integrate_values(grid: &RadialGrid, values: &[f64]) -> Result<f64> {
    if values.len() != grid.len() {
        return Err(Error::GridMismatch("integrand length".into()));
    }
    check_finite(grid, values)?;
    Ok(values.iter().zip(grid.weights()).map(|(f, w)| w * f).sum())
}

/// `‖u‖_s^s`.
pub fn lp_norm_pow(u: &RadialFn, s: f64) -> Result<f64> {
    if !(s >= 1.0) {
        return Err(Error::InvalidParams(format!("norm exponent must be >= 1, got {s}")));
    }
    let vals: Vec<f64> = u.values().iter().map(|v| v.abs().powf(s)).collect();
    integrate_values(u.grid(), &vals)
}

/// `‖∇u‖_s^s` from the staggered derivative and the exact cell measures.
pub fn grad_norm_pow(u: &RadialFn, s: f64) -> Result<f64> {
    if !(s >= 1.0) {
        return Err(Error::InvalidParams(format!("norm exponent must be >= 1, got {s}")));
    }
    let d = u.derivative();
    let cells = u.grid().cell_measures();
    let mut acc = 0.0;
    for (k, (dk, c)) in d.iter().zip(cells).enumerate() {
        let term = dk.abs().powf(s);
        if !term.is_finite() {
            return Err(Error::NonFinite { index: k, r: u.grid().nodes()[k] });
        }
        acc += c * term;
    }
    Ok(acc)
}

/// Decreasing rearrangement of `|u|` on the same grid.
///
/// Node values sorted in decreasing order are laid out by cumulative
/// weighted measure; each target node takes the value whose measure interval
/// contains the target node's measure midpoint.
pub fn rearrange_decreasing(u: &RadialFn) -> RadialFn {
    let w = u.grid().weights();
    let mut order: Vec<usize> = (0..u.values().len()).collect();
    // stable: ties keep their radial order, so sorted profiles are fixed points
    order.sort_by(|&a, &b| {
        u.values()[b]
            .abs()
            .partial_cmp(&u.values()[a].abs())
            .expect("finite")
    });
    let mut out = Vec::with_capacity(order.len());
    let mut src = 0usize;
    let mut src_lo = 0.0;
    let mut target_lo = 0.0;
    for &wi in w {
        let mid = target_lo + 0.5 * wi;
        while src + 1 < order.len() && src_lo + w[order[src]] <= mid {
            src_lo += w[order[src]];
            src += 1;
        }
        out.push(u.values()[order[src]].abs());
        target_lo += wi;
    }
    if let Some(&first) = order.first() {
        out[0] = u.values()[first].abs();
    }
    RadialFn { grid: u.grid().clone(), values: out }
}

/// Measure of `{|u| > t}` with respect to the node weights.
pub fn superlevel_measure(u: &RadialFn, t: f64) -> f64 {
    u.values()
        .iter()
        .zip(u.grid().weights())
        .filter(|(v, _)| v.abs() > t)
        .map(|(_, w)| w)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(dim: usize, r_max: f64, n: usize) -> Arc<RadialGrid> {
        Arc::new(RadialGrid::uniform(dim, r_max, n).unwrap())
    }

    #[test]
    fn sphere_measures() {
        assert_eq!(unit_sphere_measure(1), 2.0);
        assert!((unit_sphere_measure(2) - 2.0 * PI).abs() < 1e-15);
        assert!((unit_sphere_measure(3) - 4.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_measure(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((unit_sphere_measure(5) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn weights_sum_to_ball_volume() {
        for dim in 1..=9 {
            for spacing in [Spacing::Uniform, Spacing::Geometric(1.01)] {
                let g = RadialGrid::new(dim, 3.7, 300, spacing).unwrap();
                let total: f64 = g.weights().iter().sum();
                let cells: f64 = g.cell_measures().iter().sum();
                let exact = g.ball_volume();
                assert!(((total - exact) / exact).abs() < 1e-10, "N={dim} {spacing}");
                assert!(((cells - exact) / exact).abs() < 1e-10);
                assert!(g.weights().iter().all(|&w| w >= 0.0));
            }
        }
    }

    #[test]
    fn integrate_examples() {
        let g = grid(3, 2.0, 257);
        let one = RadialFn::from_fn(g.clone(), |_| 1.0).unwrap();
        let vol = integrate(&one).unwrap();
        assert!((vol - 4.0 * PI / 3.0 * 8.0).abs() < 1e-8);
        assert_eq!(integrate(&RadialFn::zeros(g)).unwrap(), 0.0);

        let g1 = grid(1, 10.0, 2001);
        let gauss = RadialFn::from_fn(g1, |r| (-r * r).exp()).unwrap();
        assert!((integrate(&gauss).unwrap() - PI.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn non_finite_integrand_names_node() {
        let g = grid(2, 1.0, 32);
        let mut vals = vec![1.0; 32];
        vals[7] = f64::NAN;
        match integrate_values(&g, &vals) {
            Err(Error::NonFinite { index, .. }) => assert_eq!(index, 7),
            other => panic!("unexpected {other:?}"),
        }
        assert!(RadialFn::new(g, vals).is_err());
    }

    #[test]
    fn norm_examples() {
        let g = grid(3, 8.0, 16385);
        let gauss = RadialFn::from_fn(g.clone(), |r| (-r * r).exp()).unwrap();
        let l2 = lp_norm_pow(&gauss, 2.0).unwrap();
        assert!((l2 - (PI / 2.0).powf(1.5)).abs() < 1e-6, "{l2}");

        let g = grid(3, 8.0, 4096);
        let gauss = RadialFn::from_fn(g.clone(), |r| (-r * r).exp()).unwrap();
        let d2 = grad_norm_pow(&gauss, 2.0).unwrap();
        assert!((d2 - 3.0 * (PI / 2.0).powf(1.5)).abs() < 1e-4, "{d2}");

        let g1 = grid(1, 1.0, 101);
        let lin = RadialFn::from_fn(g1, |r| r).unwrap();
        assert!((grad_norm_pow(&lin, 2.0).unwrap() - 2.0).abs() < 1e-10);

        let c = RadialFn::from_fn(g.clone(), |_| 3.0).unwrap();
        assert_eq!(grad_norm_pow(&c, 2.0).unwrap(), 0.0);
        assert_eq!(lp_norm_pow(&RadialFn::zeros(g.clone()), 4.0).unwrap(), 0.0);

        // hat of height one: ‖u‖_s^s ≤ measure of its support
        let hat = RadialFn::from_fn(g.clone(), |r| (1.0 - (r - 2.0).abs()).max(0.0)).unwrap();
        let supp = superlevel_measure(&hat, 0.0);
        assert!(lp_norm_pow(&hat, 3.0).unwrap() <= supp);
    }

    #[test]
    fn rearrangement_fixed_points() {
        let g = grid(2, 5.0, 200);
        let dec = RadialFn::from_fn(g.clone(), |r| (-r).exp()).unwrap();
        assert_eq!(rearrange_decreasing(&dec).values(), dec.values());
        let c = RadialFn::from_fn(g, |_| 0.7).unwrap();
        assert_eq!(rearrange_decreasing(&c).values(), c.values());
    }

    #[test]
    fn rearrangement_of_bump() {
        let g = grid(3, 6.0, 600);
        let bump = RadialFn::from_fn(g.clone(), |r| (-(r - 3.0) * (r - 3.0) * 4.0).exp()).unwrap();
        let star = rearrange_decreasing(&bump);
        assert!(star.values().windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(star.max_abs(), bump.max_abs());
        // superlevel-set measures agree to within one node's weight
        let wmax = g.weights().iter().cloned().fold(0.0, f64::max);
        for k in 0..50 {
            let t = k as f64 / 50.0;
            let a = superlevel_measure(&bump, t);
            let b = superlevel_measure(&star, t);
            assert!((a - b).abs() <= 2.0 * wmax, "t={t} {a} {b}");
        }
    }

    #[test]
    fn interpolation_reproduces_nodes_and_cubics() {
        let g = Arc::new(RadialGrid::new(2, 4.0, 101, Spacing::Geometric(1.02)).unwrap());
        let f = RadialFn::from_fn(g.clone(), |r| 1.0 + r * r - 0.1 * r * r * r).unwrap();
        for (r, v) in g.nodes().iter().zip(f.values()) {
            assert!((f.eval(*r) - v).abs() < 1e-12);
        }
        let r = 2.345;
        let exact = 1.0 + r * r - 0.1 * r * r * r;
        assert!((f.eval(r) - exact).abs() < 1e-10);
        assert_eq!(f.eval(4.5), 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let g = Arc::new(RadialGrid::new(4, 7.5, 40, Spacing::Geometric(1.05)).unwrap());
        let f = RadialFn::from_fn(g, |r| (-r).exp() * 0.3).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# N=4 r_max=7.5 n=40 spacing=geometric:1.05\n"));
        let back = RadialFn::read_csv(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back.values(), f.values());
        assert_eq!(back.grid().nodes(), f.grid().nodes());
    }

    #[test]
    fn refinement_order_on_gaussian() {
        let exact = 3.0 * (PI / 2.0).powf(1.5);
        let err = |n: usize| {
            let g = grid(3, 8.0, n);
            let u = RadialFn::from_fn(g, |r| (-r * r).exp()).unwrap();
            (grad_norm_pow(&u, 2.0).unwrap() - exact).abs()
        };
        let (e1, e2) = (err(501), err(1001));
        assert!((e1 / e2).log2() >= 1.9, "{e1} {e2}");
        let exact_l2 = (PI / 2.0).powf(1.5);
        let err = |n: usize| {
            let g = grid(3, 8.0, n);
            let u = RadialFn::from_fn(g, |r| (-r * r).exp()).unwrap();
            (lp_norm_pow(&u, 2.0).unwrap() - exact_l2).abs()
        };
        let (e1, e2) = (err(501), err(1001));
        assert!((e1 / e2).log2() >= 1.9, "{e1} {e2}");
    }
}
