//! Multi-channel linear plant `ẋ = A(t)x + Σ_j B_j u_j` under linear state
//! feedback `u_j = K_j x`, with piecewise-constant drift schedules.

mod factors;
mod flow;

pub use factors::{transition_factor_path, transition_factors, TransitionFactors};
pub use flow::{flow_map, FlowMap};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Axis-aligned box `[lo_i, hi_i)`; with `wrap` set, opposite faces are
/// identified and the box is a torus.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    lo: Vec<f64>,
    hi: Vec<f64>,
    wrap: bool,
}

impl Domain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, wrap: bool) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::Dimension(format!(
                "domain bounds have lengths {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        for (i, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !(l.is_finite() && h.is_finite() && h > l) {
                return Err(Error::config(
                    format!("domain.hi[{i}]"),
                    format!("need finite lo < hi, got [{l}, {h}]"),
                ));
            }
        }
        Ok(Domain { lo, hi, wrap })
    }

    /// The unit cube `[0,1)^d`.
    pub fn unit(d: usize, wrap: bool) -> Self {
        Domain {
            lo: vec![0.0; d],
            hi: vec![1.0; d],
            wrap,
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn wrap(&self) -> bool {
        self.wrap
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn with_wrap(&self, wrap: bool) -> Self {
        Domain { wrap, ..self.clone() }
    }

    pub fn same_box(&self, other: &Domain) -> bool {
        self.lo == other.lo && self.hi == other.hi
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *v >= *l && *v < *h)
    }

    /// Reduces every coordinate into `[lo, hi)` by `(x - lo) mod (hi - lo)`.
    pub fn reduce(&self, x: &mut [f64]) {
        for (axis, v) in x.iter_mut().enumerate() {
            let lo = self.lo[axis];
            let w = self.hi[axis] - lo;
            let mut r = (*v - lo).rem_euclid(w);
            // rem_euclid can round up to exactly w for tiny negative inputs
            if r >= w {
                r = 0.0;
            }
            *v = lo + r;
        }
    }
}

/// One constant piece of the drift schedule, active from `start` until the
/// next segment's start.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub drift: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    d: usize,
    segments: Vec<Segment>,
    inputs: Vec<DMatrix<f64>>,
    domain: Domain,
    dt: f64,
    direct_map: Option<DMatrix<f64>>,
}

impl SystemSpec {
    pub fn new(
        segments: Vec<Segment>,
        inputs: Vec<DMatrix<f64>>,
        domain: Domain,
        dt: f64,
    ) -> Result<Self> {
        let d = domain.dim();
        if segments.is_empty() {
            return Err(Error::config("A.segments", "at least one segment is required"));
        }
        if segments[0].start != 0.0 {
            return Err(Error::config("A.segments[0].start", "first segment must start at 0"));
        }
        for (i, seg) in segments.iter().enumerate() {
            if seg.drift.nrows() != d || seg.drift.ncols() != d {
                return Err(Error::Dimension(format!(
                    "A.segments[{i}] is {}x{}, expected {d}x{d}",
                    seg.drift.nrows(),
                    seg.drift.ncols()
                )));
            }
            if seg.drift.iter().any(|v| !v.is_finite()) {
                return Err(Error::config(format!("A.segments[{i}].matrix"), "non-finite entry"));
            }
            if i > 0 && seg.start <= segments[i - 1].start {
                return Err(Error::config(
                    format!("A.segments[{i}].start"),
                    "switch times must be strictly increasing",
                ));
            }
        }
        if inputs.is_empty() {
            return Err(Error::config("channels", "at least one channel is required"));
        }
        for (j, b) in inputs.iter().enumerate() {
            if b.nrows() != d || b.ncols() == 0 {
                return Err(Error::Dimension(format!(
                    "channels[{j}].B is {}x{}, expected {d}xr with r >= 1",
                    b.nrows(),
                    b.ncols()
                )));
            }
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::config("dt", "integration step must be positive"));
        }
        Ok(SystemSpec {
            d,
            segments,
            inputs,
            domain,
            dt,
            direct_map: None,
        })
    }

    /// Time-invariant plant with a single drift matrix.
    pub fn time_invariant(
        drift: DMatrix<f64>,
        inputs: Vec<DMatrix<f64>>,
        domain: Domain,
        dt: f64,
    ) -> Result<Self> {
        Self::new(vec![Segment { start: 0.0, drift }], inputs, domain, dt)
    }

    /// Replaces the integrated flow by an explicit one-step map matrix. Flow
    /// maps built from this system ignore `tau` and the gains.
    pub fn with_direct_map(mut self, map: DMatrix<f64>) -> Result<Self> {
        if map.nrows() != self.d || map.ncols() != self.d {
            return Err(Error::Dimension(format!(
                "direct map is {}x{}, expected {}x{}",
                map.nrows(),
                map.ncols(),
                self.d,
                self.d
            )));
        }
        self.direct_map = Some(map);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn channels(&self) -> usize {
        self.inputs.len()
    }

    pub fn input(&self, j: usize) -> &DMatrix<f64> {
        &self.inputs[j]
    }

    pub fn inputs(&self) -> &[DMatrix<f64>] {
        &self.inputs
    }

    /// Input width `r_j` of channel `j`.
    pub fn input_width(&self, j: usize) -> usize {
        self.inputs[j].ncols()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn direct_map(&self) -> Option<&DMatrix<f64>> {
        self.direct_map.as_ref()
    }

    pub fn drift_at(&self, t: f64) -> &DMatrix<f64> {
        let idx = self.segments.partition_point(|s| s.start <= t).saturating_sub(1);
        &self.segments[idx].drift
    }

    /// Splits `[t0, t1]` at drift switch times; each piece carries the
    /// segment index active on it.
    pub(crate) fn pieces(&self, t0: f64, t1: f64) -> Vec<(f64, f64, usize)> {
        let mut out = Vec::new();
        for (i, seg) in self.segments.iter().enumerate() {
            let end = self.segments.get(i + 1).map_or(f64::INFINITY, |s| s.start);
            let a = seg.start.max(t0);
            let b = end.min(t1);
            if b > a {
                out.push((a, b, i));
            }
        }
        out
    }
}

/// One gain matrix `K_j` (size `r_j x d`) per channel, every entry bounded by
/// `bound` in absolute value.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSet {
    gains: Vec<DMatrix<f64>>,
    bound: f64,
}

impl GainSet {
    pub fn new(gains: Vec<DMatrix<f64>>, bound: f64) -> Result<Self> {
        if !(bound > 0.0) {
            return Err(Error::config("gains.bound", "gain bound must be positive"));
        }
        for (j, k) in gains.iter().enumerate() {
            if let Some(v) = k.iter().find(|v| !(v.abs() <= bound)) {
                return Err(Error::config(
                    format!("gains.K[{j}]"),
                    format!("entry {v} exceeds the gain bound {bound}"),
                ));
            }
        }
        Ok(GainSet { gains, bound })
    }

    pub fn zeros(spec: &SystemSpec, bound: f64) -> Result<Self> {
        let gains = (0..spec.channels())
            .map(|j| DMatrix::zeros(spec.input_width(j), spec.dim()))
            .collect();
        Self::new(gains, bound)
    }

    pub fn gain(&self, j: usize) -> &DMatrix<f64> {
        &self.gains[j]
    }

    pub fn gains(&self) -> &[DMatrix<f64>] {
        &self.gains
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    /// Copy with channel `j`'s gain replaced.
    pub fn with_gain(&self, j: usize, k: DMatrix<f64>) -> Self {
        let mut gains = self.gains.clone();
        gains[j] = k;
        GainSet {
            gains,
            bound: self.bound,
        }
    }

    /// All gains flattened row-major, channel by channel.
    pub fn flattened(&self) -> Vec<f64> {
        self.gains
            .iter()
            .flat_map(|k| k.transpose().iter().copied().collect::<Vec<_>>())
            .collect()
    }

    pub fn check_for(&self, spec: &SystemSpec) -> Result<()> {
        if self.gains.len() != spec.channels() {
            return Err(Error::Dimension(format!(
                "{} gain matrices for {} channels",
                self.gains.len(),
                spec.channels()
            )));
        }
        for (j, k) in self.gains.iter().enumerate() {
            if k.nrows() != spec.input_width(j) || k.ncols() != spec.dim() {
                return Err(Error::Dimension(format!(
                    "K[{j}] is {}x{}, expected {}x{}",
                    k.nrows(),
                    k.ncols(),
                    spec.input_width(j),
                    spec.dim()
                )));
            }
        }
        Ok(())
    }
}

/// `A(t) + Σ_j B_j K_j`.
pub fn closed_loop_matrix(spec: &SystemSpec, gains: &GainSet, t: f64) -> Result<DMatrix<f64>> {
    if !(t >= 0.0) {
        return Err(Error::Precondition(format!("time must be >= 0, got {t}")));
    }
    gains.check_for(spec)?;
    Ok(closed_loop_without(spec, gains, t, None))
}

/// Closed-loop drift with channel `skip` left open.
pub(crate) fn closed_loop_without(
    spec: &SystemSpec,
    gains: &GainSet,
    t: f64,
    skip: Option<usize>,
) -> DMatrix<f64> {
    let mut acl = spec.drift_at(t).clone();
    for (j, (b, k)) in spec.inputs().iter().zip(gains.gains()).enumerate() {
        if Some(j) != skip {
            acl += b * k;
        }
    }
    acl
}

/// State-transition matrix of the closed loop over `[0, t]`, one exact
/// exponential per constant segment.
pub fn transition_matrix(spec: &SystemSpec, gains: &GainSet, t: f64) -> Result<DMatrix<f64>> {
    if !(t >= 0.0) {
        return Err(Error::Precondition(format!("time must be >= 0, got {t}")));
    }
    gains.check_for(spec)?;
    let d = spec.dim();
    let mut phi = DMatrix::identity(d, d);
    for (a, b, _) in spec.pieces(0.0, t) {
        let acl = closed_loop_without(spec, gains, a, None);
        phi = (acl * (b - a)).exp() * phi;
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericRange {
                time: blow_up_time(spec, gains, a, b),
                path: None,
            });
        }
    }
    Ok(phi)
}

/// Solves `ẋ = A_cl(t) x` from `x0` to time `t`. No domain wrap.
pub fn integrate_flow(spec: &SystemSpec, gains: &GainSet, x0: &[f64], t: f64) -> Result<Vec<f64>> {
    if x0.len() != spec.dim() {
        return Err(Error::Dimension(format!(
            "initial state has length {}, expected {}",
            x0.len(),
            spec.dim()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("initial state must be finite".into()));
    }
    if !(t >= 0.0) {
        return Err(Error::Precondition(format!("time must be >= 0, got {t}")));
    }
    gains.check_for(spec)?;
    let mut x = DVector::from_column_slice(x0);
    for (a, b, _) in spec.pieces(0.0, t) {
        let acl = closed_loop_without(spec, gains, a, None);
        let next = (acl.clone() * (b - a)).exp() * &x;
        if next.iter().any(|v| !v.is_finite()) {
            // locate the blow-up inside this segment by bisection on the state
            let (mut lo, mut hi) = (a, b);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let y = (acl.clone() * (mid - a)).exp() * &x;
                if y.iter().all(|v| v.is_finite()) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Err(Error::NumericRange { time: hi, path: None });
        }
        x = next;
    }
    Ok(x.iter().copied().collect())
}

fn blow_up_time(spec: &SystemSpec, gains: &GainSet, a: f64, b: f64) -> f64 {
    let acl = closed_loop_without(spec, gains, a, None);
    let (mut lo, mut hi) = (a, b);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if (acl.clone() * (mid - a)).exp().iter().all(|v| v.is_finite()) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}
