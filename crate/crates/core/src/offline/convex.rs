//! Log-barrier interior-point solver for the multi-frame energy allocation.
//!
//! Frame `i` has two variables: `x_i` (the charging fraction `rho_i` for a
//! charge-phase frame, or the internal energy `u_i` stored while splitting
//! power) and the end-of-frame battery energy `B_i`. The internal drain is
//! `w_i = B_{i-1} + s_i(x_i) - B_i` where `s_i` is linear, so every constraint
//! is linear and touches at most three adjacent variables. Newton systems are
//! pentadiagonal and solved by banded Cholesky in O(N).

use super::banded::BandedMatrix;
use crate::battery::BatteryModel;
use crate::error::{Error, Result};
use crate::frame::RateFn;

#[derive(Debug, Clone, Copy)]
pub(crate) enum ChargeCurve {
    /// Constant efficiency: external cost `u / eta`.
    Linear { eta: f64 },
    /// Resistive curve inverted on `[0, c_upper]`.
    Battery { model: BatteryModel, c_upper: f64 },
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum DischargeCurve {
    /// Delivered energy `eta * w`, with `w <= cap` (scaled by `1 - rho` in charge-phase frames).
    Linear { eta: f64, cap: f64 },
    /// Delivered energy `tau * phi(w / tau)` with the exact circuit relation.
    Battery { model: BatteryModel, cap: f64 },
}

impl DischargeCurve {
    fn cap(&self) -> f64 {
        match *self {
            DischargeCurve::Linear { cap, .. } | DischargeCurve::Battery { cap, .. } => cap,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum FrameKind {
    /// `x = rho`; the charging phase stores `store * rho` joules.
    Charge { store: f64 },
    /// `x = u`, internal joules stored in parallel with transmission.
    Split { curve: ChargeCurve },
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvexFrame {
    pub kind: FrameKind,
    /// `None` marks a silent frame whose transmission is ignored.
    pub rate: Option<RateFn>,
    /// `(c - p) * tau`.
    pub base: f64,
    pub tau: f64,
    pub x_hi: f64,
    pub discharge: DischargeCurve,
}

impl ConvexFrame {
    fn sigma(&self) -> f64 {
        match self.kind {
            FrameKind::Charge { store } => store,
            FrameKind::Split { .. } => 1.0,
        }
    }

    /// Transmit energy and its derivatives: `(E, E_x, E_w, E_xx, E_ww)`.
    fn energy(&self, x: f64, w: f64) -> (f64, f64, f64, f64, f64) {
        let (y, yw, yww) = match self.discharge {
            DischargeCurve::Linear { eta, .. } => (eta * w, eta, 0.0),
            DischargeCurve::Battery { model, .. } => {
                let (phi, d1, d2) = model.discharge_curve(w / self.tau);
                (self.tau * phi, d1, d2 / self.tau)
            }
        };
        match self.kind {
            FrameKind::Charge { .. } => ((1.0 - x) * self.base + y, -self.base, yw, 0.0, yww),
            FrameKind::Split { curve } => {
                let (xc, x1, x2) = match curve {
                    ChargeCurve::Linear { eta } => (x / eta, 1.0 / eta, 0.0),
                    ChargeCurve::Battery { model, c_upper } => {
                        let c = model.charge_for_internal(x / self.tau, c_upper);
                        let (_, f1, f2) = model.charge_curve(c);
                        let f1 = f1.max(1e-300);
                        (self.tau * c, 1.0 / f1, -f2 / (f1 * f1 * f1 * self.tau))
                    }
                };
                (self.base - xc + y, -x1, yw, -x2, yww)
            }
        }
    }
}

/// Rate with a concave quadratic continuation below zero energy, so the
/// objective stays smooth and concave when a frame's energy dips negative.
fn rate_ext(r: &RateFn, e: f64) -> (f64, f64, f64) {
    let ke = r.k * e;
    if ke >= 0.0 {
        let d = 1.0 + ke;
        (r.coef * ke.ln_1p(), r.coef * r.k / d, -r.coef * r.k * r.k / (d * d))
    } else {
        (r.coef * (ke - 0.5 * ke * ke), r.coef * r.k * (1.0 - ke), -r.coef * r.k * r.k)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct ConvexProblem {
    pub frames: Vec<ConvexFrame>,
    pub b0: f64,
    pub capacity: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct ConvexSolution {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
    pub e: Vec<f64>,
    /// Mean (extended) rate over frames.
    pub objective: f64,
    pub newton_steps: usize,
    pub gap: f64,
}

#[derive(Debug, Clone, Copy)]
struct Lin {
    idx: [usize; 3],
    a: [f64; 3],
    len: usize,
    rhs: f64,
}

impl Lin {
    fn dot(&self, z: &[f64]) -> f64 {
        (0..self.len).map(|k| self.a[k] * z[self.idx[k]]).sum()
    }
}

/// Gap target `m / t` at which the barrier iteration stops.
const GAP_TOL: f64 = 1e-12;
const MAX_NEWTON: usize = 5000;

struct Builder<'a> {
    fixed: &'a [Option<f64>],
    out: Vec<Lin>,
    inconsistent: Option<f64>,
}

impl Builder<'_> {
    /// Adds `sum coef * z[var] + konst <= 0`, folding fixed variables.
    fn push(&mut self, terms: &[(Option<usize>, f64)], konst: f64) {
        let mut lin = Lin { idx: [0; 3], a: [0.0; 3], len: 0, rhs: -konst };
        for &(var, coef) in terms {
            match var {
                None => {}
                Some(v) => match self.fixed[v] {
                    Some(val) => lin.rhs -= coef * val,
                    None => {
                        lin.idx[lin.len] = v;
                        lin.a[lin.len] = coef;
                        lin.len += 1;
                    }
                },
            }
        }
        if lin.len == 0 {
            if lin.rhs < -1e-12 {
                self.inconsistent = Some(lin.rhs);
            }
            return;
        }
        self.out.push(lin);
    }
}

pub(crate) fn solve(prob: &ConvexProblem) -> Result<ConvexSolution> {
    let n = prob.frames.len();
    if n == 0 {
        return Err(Error::validation("frames", "at least one frame is required"));
    }
    let cap_b = prob.capacity;
    let nv = 2 * n;
    let xi = |i: usize| 2 * i;
    let bi = |i: usize| 2 * i + 1;
    let prev = |i: usize| if i == 0 { None } else { Some(2 * i - 1) };

    // Variables pinned by the data (no strictly feasible interior otherwise).
    let mut fixed: Vec<Option<f64>> = vec![None; nv];
    let mut reach_prev = prob.b0;
    for (i, fr) in prob.frames.iter().enumerate() {
        let prev_fixed = if i == 0 { Some(prob.b0) } else { fixed[bi(i - 1)] };
        let mut x_zero = fr.x_hi <= 0.0 || fr.sigma() <= 0.0;
        if let (FrameKind::Charge { .. }, Some(pv)) = (fr.kind, prev_fixed) {
            if pv >= cap_b * (1.0 - 1e-15) {
                x_zero = true;
            }
        }
        if x_zero {
            fixed[xi(i)] = Some(0.0);
        }
        let add = if x_zero { 0.0 } else { fr.sigma() * fr.x_hi };
        let reach = cap_b.min(reach_prev + add);
        if reach <= 1e-15 {
            fixed[bi(i)] = Some(0.0);
        }
        reach_prev = reach;
    }

    let mut bld = Builder { fixed: &fixed, out: Vec::new(), inconsistent: None };
    for (i, fr) in prob.frames.iter().enumerate() {
        let (p, x, b) = (prev(i), Some(xi(i)), Some(bi(i)));
        let p0 = if i == 0 { prob.b0 } else { 0.0 };
        let s = fr.sigma();
        bld.push(&[(x, -1.0)], 0.0);
        bld.push(&[(x, 1.0)], -fr.x_hi);
        // w >= 0
        bld.push(&[(p, -1.0), (x, -s), (b, 1.0)], -p0);
        let wcap = if fr.rate.is_some() { fr.discharge.cap() } else { f64::INFINITY };
        if wcap.is_finite() {
            match fr.kind {
                FrameKind::Charge { .. } => bld.push(&[(p, 1.0), (x, s + wcap), (b, -1.0)], p0 - wcap),
                FrameKind::Split { .. } => bld.push(&[(p, 1.0), (x, s), (b, -1.0)], p0 - wcap),
            }
        }
        bld.push(&[(b, -1.0)], 0.0);
        if cap_b.is_finite() {
            bld.push(&[(b, 1.0)], -cap_b);
            if let FrameKind::Charge { store } = fr.kind {
                if store > 0.0 {
                    bld.push(&[(p, 1.0), (x, store)], p0 - cap_b);
                }
            }
        }
    }
    if let Some(r) = bld.inconsistent {
        return Err(Error::Solver(format!("constraint set is empty (residual {r:.3e})")));
    }
    let cons = bld.out;

    // Strictly feasible start built frame by frame.
    let mut z = vec![0.0; nv];
    for (v, f) in fixed.iter().enumerate() {
        if let Some(val) = f {
            z[v] = *val;
        }
    }
    let mut pv = prob.b0;
    for (i, fr) in prob.frames.iter().enumerate() {
        let wcap_full = if fr.rate.is_some() { fr.discharge.cap() } else { f64::INFINITY };
        if fixed[xi(i)].is_none() {
            let mut x = 0.5 * fr.x_hi;
            match fr.kind {
                FrameKind::Charge { store } => {
                    if cap_b.is_finite() {
                        x = x.min(0.5 * (cap_b - pv) / store);
                    }
                }
                FrameKind::Split { .. } => {
                    if wcap_full.is_finite() {
                        x = x.min(0.25 * wcap_full);
                    }
                }
            }
            z[xi(i)] = x;
        }
        let x = z[xi(i)];
        let a = pv + fr.sigma() * x;
        let wcap = match fr.kind {
            FrameKind::Charge { .. } => wcap_full * (1.0 - x),
            FrameKind::Split { .. } => wcap_full,
        };
        if fixed[bi(i)].is_none() {
            let lo = (a - wcap).max(0.0);
            let hi = a.min(cap_b);
            z[bi(i)] = 0.5 * (lo + hi);
        }
        pv = z[bi(i)];
    }
    for c in &cons {
        if !(c.rhs - c.dot(&z) > 0.0) {
            return Err(Error::Solver("could not construct a strictly feasible start".into()));
        }
    }

    let inv_n = 1.0 / n as f64;
    let frame_w = |z: &[f64], i: usize| -> f64 {
        let p = if i == 0 { prob.b0 } else { z[bi(i - 1)] };
        p + prob.frames[i].sigma() * z[xi(i)] - z[bi(i)]
    };
    let objective = |z: &[f64]| -> f64 {
        let mut f = 0.0;
        for (i, fr) in prob.frames.iter().enumerate() {
            if let Some(r) = &fr.rate {
                let (e, ..) = fr.energy(z[xi(i)], frame_w(z, i));
                f -= rate_ext(r, e).0 * inv_n;
            }
        }
        f
    };
    let barrier = |z: &[f64], t: f64| -> f64 {
        let mut phi = 0.0;
        for c in &cons {
            let s = c.rhs - c.dot(z);
            if !(s > 0.0) {
                return f64::INFINITY;
            }
            phi -= s.ln();
        }
        t * objective(z) + phi
    };

    let m = cons.len().max(1) as f64;
    let mut t = 1.0;
    let mut steps = 0usize;
    loop {
        // Centering by damped Newton.
        for _ in 0..200 {
            let mut g = vec![0.0; nv];
            let mut h = BandedMatrix::zeros(nv, 2);
            for (i, fr) in prob.frames.iter().enumerate() {
                let Some(r) = &fr.rate else { continue };
                let w = frame_w(&z, i);
                let (e, ex, ew, exx, eww) = fr.energy(z[xi(i)], w);
                let (_, r1, r2) = rate_ext(r, e);
                let s = fr.sigma();
                let vars = [prev(i), Some(xi(i)), Some(bi(i))];
                let grad_e = [ew, ex + s * ew, -ew];
                let jw = [1.0, s, -1.0];
                for a in 0..3 {
                    let Some(va) = vars[a] else { continue };
                    g[va] -= t * inv_n * r1 * grad_e[a];
                    for bb in 0..=a {
                        let Some(vb) = vars[bb] else { continue };
                        let mut he = eww * jw[a] * jw[bb];
                        if a == 1 && bb == 1 {
                            he += exx;
                        }
                        let v = -t * inv_n * (r2 * grad_e[a] * grad_e[bb] + r1 * he);
                        h.add(va, vb, v);
                    }
                }
            }
            for c in &cons {
                let s = c.rhs - c.dot(&z);
                for a in 0..c.len {
                    g[c.idx[a]] += c.a[a] / s;
                    for bb in 0..=a {
                        h.add(c.idx[a], c.idx[bb], c.a[a] * c.a[bb] / (s * s));
                    }
                }
            }
            for (v, f) in fixed.iter().enumerate() {
                if f.is_some() {
                    h.pin(v);
                    g[v] = 0.0;
                }
            }
            let mut dz: Vec<f64> = g.iter().map(|v| -v).collect();
            let mut reg = 0.0;
            let maxdiag = (0..nv).map(|i| h.get(i, i).abs()).fold(0.0, f64::max).max(1e-300);
            while !h.solve(&mut dz) {
                let step = if reg == 0.0 { 1e-14 * maxdiag } else { reg * 9.0 };
                h.add_diagonal(step);
                reg += step;
                dz = g.iter().map(|v| -v).collect();
                if reg > maxdiag {
                    return Err(Error::Solver("Newton system is not positive definite".into()));
                }
            }
            steps += 1;
            let lambda2 = -g.iter().zip(&dz).map(|(a, b)| a * b).sum::<f64>();
            if lambda2 / 2.0 <= 1e-10 {
                break;
            }
            let mut smax: f64 = 1.0;
            for c in &cons {
                let ad = c.dot(&dz);
                if ad > 0.0 {
                    smax = smax.min(0.99 * (c.rhs - c.dot(&z)) / ad);
                }
            }
            let f0 = barrier(&z, t);
            let mut st = smax;
            let mut zn = z.clone();
            let mut accepted = false;
            for _ in 0..80 {
                for v in 0..nv {
                    zn[v] = z[v] + st * dz[v];
                }
                let f1 = barrier(&zn, t);
                if f1 <= f0 - 0.25 * st * lambda2 {
                    accepted = true;
                    break;
                }
                st *= 0.5;
            }
            if !accepted {
                break;
            }
            std::mem::swap(&mut z, &mut zn);
            if steps > MAX_NEWTON {
                return Err(Error::Solver(format!("no convergence after {steps} Newton steps (gap {:.3e})", m / t)));
            }
        }
        if m / t < GAP_TOL {
            break;
        }
        t *= 10.0;
    }

    let mut x = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    let mut e = Vec::with_capacity(n);
    for (i, fr) in prob.frames.iter().enumerate() {
        let wi = frame_w(&z, i).max(0.0);
        x.push(z[xi(i)]);
        w.push(wi);
        e.push(fr.energy(z[xi(i)], wi).0);
    }
    Ok(ConvexSolution { x, w, e, objective: -objective(&z), newton_steps: steps, gap: m / t })
}
