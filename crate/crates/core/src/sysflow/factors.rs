//! Factorization of the closed-loop transition matrix into a channel-removed
//! part and a channel-`j` part: `Φ(t) = Φ_¬j(t) Φ_j(t)`, where
//!
//! ```text
//! dΦ_¬j/dt = (A + Σ_{i≠j} B_i K_i) Φ_¬j
//! dΦ_j/dt  = B*_j(t) Φ_j,   B*_j = Φ_¬j⁻¹ B_j K_j Φ_¬j
//! ```
//!
//! `Φ_¬j` is advanced with exact exponentials; `Φ_j` with classical RK4 at the
//! system's integration step `dt`.

use nalgebra::DMatrix;

use super::{closed_loop_without, GainSet, SystemSpec};
use crate::error::{Error, Result};

const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionFactors {
    pub channel: usize,
    pub time: f64,
    pub phi_without: DMatrix<f64>,
    pub phi_channel: DMatrix<f64>,
    pub product: DMatrix<f64>,
}

/// Factors for channel `j` (zero-based) over `[0, tau]`.
pub fn transition_factors(
    spec: &SystemSpec,
    gains: &GainSet,
    j: usize,
    tau: f64,
) -> Result<TransitionFactors> {
    if !(tau >= 0.0) {
        return Err(Error::Precondition(format!("tau must be >= 0, got {tau}")));
    }
    let mut path = transition_factor_path(spec, gains, j, &[tau])?;
    Ok(path.pop().expect("one time requested"))
}

/// Factors for channel `j` at each of the ascending `times`, from a single
/// integration pass.
pub fn transition_factor_path(
    spec: &SystemSpec,
    gains: &GainSet,
    j: usize,
    times: &[f64],
) -> Result<Vec<TransitionFactors>> {
    gains.check_for(spec)?;
    if j >= spec.channels() {
        return Err(Error::Precondition(format!(
            "channel index {j} out of range for {} channels",
            spec.channels()
        )));
    }
    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Precondition("times must be finite, >= 0 and ascending".into()));
    }
    let d = spec.dim();
    let t_end = times.last().copied().unwrap_or(0.0);

    let mut breaks: Vec<f64> = spec
        .segments()
        .iter()
        .map(|s| s.start)
        .filter(|s| *s < t_end)
        .chain(times.iter().copied())
        .collect();
    breaks.push(0.0);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let bk = spec.input(j) * gains.gain(j);
    let mut without = DMatrix::<f64>::identity(d, d);
    let mut without_inv = DMatrix::<f64>::identity(d, d);
    let mut channel = DMatrix::<f64>::identity(d, d);
    let mut out = Vec::with_capacity(times.len());
    let mut next_time = 0;

    let record = |t: f64, w: &DMatrix<f64>, c: &DMatrix<f64>, out: &mut Vec<TransitionFactors>| {
        out.push(TransitionFactors {
            channel: j,
            time: t,
            phi_without: w.clone(),
            phi_channel: c.clone(),
            product: w * c,
        });
    };

    while next_time < times.len() && times[next_time] == 0.0 {
        record(0.0, &without, &channel, &mut out);
        next_time += 1;
    }

    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let a_without = closed_loop_without(spec, gains, a, Some(j));
        let steps = ((b - a) / spec.dt()).ceil().max(1.0) as usize;
        let h = (b - a) / steps as f64;
        let half = (&a_without * (0.5 * h)).exp();

        for s in 0..steps {
            let t = a + s as f64 * h;
            let mid = &half * &without;
            let end = &half * &mid;
            let mid_inv = checked_inverse(&mid, t + 0.5 * h)?;
            let end_inv = checked_inverse(&end, t + h)?;

            let b0 = &without_inv * &bk * &without;
            let bm = &mid_inv * &bk * &mid;
            let b1 = &end_inv * &bk * &end;

            let k1 = &b0 * &channel;
            let k2 = &bm * (&channel + &k1 * (0.5 * h));
            let k3 = &bm * (&channel + &k2 * (0.5 * h));
            let k4 = &b1 * (&channel + &k3 * h);
            channel += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);

            without = end;
            without_inv = end_inv;
            if channel.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericRange { time: t + h, path: None });
            }
        }

        while next_time < times.len() && times[next_time] <= b {
            record(times[next_time], &without, &channel, &mut out);
            next_time += 1;
        }
    }
    Ok(out)
}

fn checked_inverse(m: &DMatrix<f64>, time: f64) -> Result<DMatrix<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericRange { time, path: None });
    }
    let inv = m.clone().lu().try_inverse().ok_or(Error::Decomposition {
        condition: f64::INFINITY,
        time,
    })?;
    let condition = norm1(m) * norm1(&inv);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Decomposition { condition, time });
    }
    Ok(inv)
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
