use ndarray::{Array1, Array2, CowArray, Ix2};

use super::newton;
use super::{
    Anchoring, Diagnostics, DualPotentials, Relaxation, Scheme, SinkhornConfig, SinkhornResult,
};
use crate::error::{invalid, Error, Result};
use crate::measures::DiscreteMeasure;
use crate::scalar::Real;
use crate::scratch;

/// Scalings leaving `[e^-40, e^40]` get absorbed into the kernel.
const ABSORB_LOG_THRESHOLD: f64 = 40.0;
/// Kernel row/column sums below this trigger a log-domain half-step.
const TINY: f64 = 1e-280;
/// Loose tolerance for the intermediate stages of an annealing schedule.
const ANNEALING_STAGE_TOLERANCE: f64 = 1e-5;
/// Newton finishing is offered when `n + m` is at most this.
pub const NEWTON_SIZE_CAP: usize = 1024;
/// Alternating iterations granted before Newton finishing takes over.
const NEWTON_AFTER: usize = 1000;
const NEWTON_MAX_STEPS: usize = 100;

pub(super) struct Problem<'a, T> {
    cost: CowArray<'a, T, Ix2>,
    pub(super) a: Array1<T>,
    pub(super) b: Array1<T>,
    pub(super) log_a: Array1<T>,
    pub(super) log_b: Array1<T>,
    pub(super) eps: T,
}

impl<'a, T: Real> Problem<'a, T> {
    fn new(cost: &'a Array2<T>, a: &Array1<T>, b: &Array1<T>, eps: T) -> Result<Self> {
        let (n, m) = cost.dim();
        if a.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: a.len() });
        }
        if b.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: b.len() });
        }
        if a.iter().chain(b.iter()).any(|w| !(*w > T::zero())) {
            return Err(invalid("Sinkhorn needs strictly positive weights; strip zero-weight atoms"));
        }
        if cost.iter().any(|c| !c.is_finite()) {
            return Err(invalid("cost matrix has non-finite entries"));
        }
        let cost = if cost.is_standard_layout() {
            CowArray::from(cost.view())
        } else {
            CowArray::from(cost.as_standard_layout().into_owned())
        };
        Ok(Self {
            cost,
            a: a.clone(),
            b: b.clone(),
            log_a: a.mapv(T::ln),
            log_b: b.mapv(T::ln),
            eps,
        })
    }

    pub(super) fn n(&self) -> usize {
        self.cost.nrows()
    }

    pub(super) fn m(&self) -> usize {
        self.cost.ncols()
    }

    pub(super) fn row(&self, i: usize) -> &[T] {
        self.cost.row(i).to_slice().expect("cost matrix in standard layout")
    }

    fn with_eps(&self, eps: T) -> Problem<'_, T> {
        Problem {
            cost: CowArray::from(self.cost.view()),
            a: self.a.clone(),
            b: self.b.clone(),
            log_a: self.log_a.clone(),
            log_b: self.log_b.clone(),
            eps,
        }
    }

    /// `-eps log sum_j b_j exp((v_j - C_ij)/eps)` for every row.
    fn u_update(&self, v: &Array1<T>, out: &mut Array1<T>) {
        let inv = T::one() / self.eps;
        let g: Vec<T> = (0..self.m()).map(|j| self.log_b[j] + v[j] * inv).collect();
        let mut buf = vec![T::zero(); self.m()];
        for i in 0..self.n() {
            let row = self.row(i);
            let mut max = T::neg_infinity();
            for j in 0..row.len() {
                let x = g[j] - row[j] * inv;
                buf[j] = x;
                if x > max {
                    max = x;
                }
            }
            let s: T = buf.iter().map(|&x| (x - max).exp()).sum();
            out[i] = -self.eps * (max + s.ln());
        }
    }

    /// `-eps log sum_i a_i exp((u_i - C_ij)/eps)` for every column.
    fn v_update(&self, u: &Array1<T>, out: &mut Array1<T>) {
        let inv = T::one() / self.eps;
        let h: Vec<T> = (0..self.n()).map(|i| self.log_a[i] + u[i] * inv).collect();
        let m = self.m();
        let mut max = vec![T::neg_infinity(); m];
        for i in 0..self.n() {
            let row = self.row(i);
            for j in 0..m {
                let x = h[i] - row[j] * inv;
                if x > max[j] {
                    max[j] = x;
                }
            }
        }
        let mut sum = vec![T::zero(); m];
        for i in 0..self.n() {
            let row = self.row(i);
            for j in 0..m {
                sum[j] += (h[i] - row[j] * inv - max[j]).exp();
            }
        }
        for j in 0..m {
            out[j] = -self.eps * (max[j] + sum[j].ln());
        }
    }

    /// `exp((f_i + g_j - C_ij)/eps)`.
    fn kernel(&self, f: &Array1<T>, g: &Array1<T>) -> Array2<T> {
        self.kernel_within(f, g, T::infinity()).expect("unbounded exponent limit")
    }

    /// Like [`Self::kernel`], but gives up once an exponent exceeds `limit`
    /// in magnitude.
    fn kernel_within(&self, f: &Array1<T>, g: &Array1<T>, limit: T) -> Option<Array2<T>> {
        let (n, m) = self.cost.dim();
        let mut k = scratch::matrix(n, m);
        if self.fill_kernel(f, g, limit, &mut k) {
            Some(k)
        } else {
            scratch::recycle(k);
            None
        }
    }

    /// Overwrites `out` with the kernel; `false` (and `out` partly written)
    /// once an exponent exceeds `limit` in magnitude.
    fn fill_kernel(&self, f: &Array1<T>, g: &Array1<T>, limit: T, out: &mut Array2<T>) -> bool {
        let inv = T::one() / self.eps;
        let fs: Vec<T> = f.iter().map(|&x| x * inv).collect();
        let gs: Vec<T> = g.iter().map(|&x| x * inv).collect();
        for i in 0..self.n() {
            let row = self.row(i);
            let out = out.row_mut(i).into_slice().expect("kernel in standard layout");
            let mut worst = T::zero();
            for j in 0..row.len() {
                let x = fs[i] + gs[j] - row[j] * inv;
                worst = worst.max(x.abs());
                out[j] = x.exp();
            }
            if worst > limit {
                return false;
            }
        }
        true
    }

    /// Whether `C` equals its transpose entry for entry.
    fn cost_is_symmetric(&self) -> bool {
        let (n, m) = self.cost.dim();
        n == m && (0..n).all(|i| (i + 1..n).all(|j| self.cost[[i, j]] == self.cost[[j, i]]))
    }

    /// [`Self::fill_kernel`] with `g = f` for a symmetric cost: each
    /// exponential is taken once and mirrored, tile by tile.
    fn fill_kernel_symmetric(&self, f: &Array1<T>, limit: T, out: &mut Array2<T>) -> bool {
        const TILE: usize = 64;
        let n = self.n();
        let inv = T::one() / self.eps;
        let fs: Vec<T> = f.iter().map(|&x| x * inv).collect();
        let k = out.as_slice_mut().expect("kernel in standard layout");
        let mut worst = T::zero();
        for bi in (0..n).step_by(TILE) {
            let ei = (bi + TILE).min(n);
            for bj in (bi..n).step_by(TILE) {
                let ej = (bj + TILE).min(n);
                for i in bi..ei {
                    let row = self.row(i);
                    for j in bj.max(i)..ej {
                        let x = fs[i] + fs[j] - row[j] * inv;
                        worst = worst.max(x.abs());
                        k[i * n + j] = x.exp();
                    }
                }
                if bj > bi {
                    for j in bj..ej {
                        for i in bi..ei {
                            k[j * n + i] = k[i * n + j];
                        }
                    }
                } else {
                    for i in bi..ei {
                        for j in i + 1..ei {
                            k[j * n + i] = k[i * n + j];
                        }
                    }
                }
            }
            if worst > limit {
                return false;
            }
        }
        true
    }

    /// Rebuilds `k` in place for new absorbed potentials.
    fn refill_kernel(&self, f: &Array1<T>, g: &Array1<T>, k: &mut Array2<T>) {
        self.fill_kernel(f, g, T::infinity(), k);
    }
}

/// Unrolled dot product; the fixed association order keeps results
/// bit-reproducible.
#[inline]
fn dot<T: Real>(x: &[T], y: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let cx = x.chunks_exact(8);
    let cy = y.chunks_exact(8);
    let (rx, ry) = (cx.remainder(), cy.remainder());
    for (a, b) in cx.zip(cy) {
        for k in 0..8 {
            acc[k] += a[k] * b[k];
        }
    }
    let mut tail = T::zero();
    for (a, b) in rx.iter().zip(ry) {
        tail += *a * *b;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline]
fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `out = K w`.
fn matvec<T: Real>(k: &Array2<T>, w: &[T], out: &mut [T]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = dot(k.row(i).to_slice().expect("standard layout"), w);
    }
}

/// `out = K^T w`.
fn matvec_t<T: Real>(k: &Array2<T>, w: &[T], out: &mut [T]) {
    out.iter_mut().for_each(|o| *o = T::zero());
    for (i, &wi) in w.iter().enumerate() {
        axpy(wi, k.row(i).to_slice().expect("standard layout"), out);
    }
}

/// One sweep over the kernel rows of a full alternating step: `t = K wv`,
/// the relaxed row scalings `su_new`, and `s = K^T (a * su_new)`, the last
/// accumulated while each row is still in cache.
#[allow(clippy::too_many_arguments)]
fn fused_sweep<T: Real>(
    k: &Array2<T>,
    wv: &[T],
    a: &Array1<T>,
    su: &[T],
    omega: T,
    t: &mut [T],
    su_new: &mut [T],
    s: &mut [T],
) {
    s.iter_mut().for_each(|o| *o = T::zero());
    for i in 0..t.len() {
        let row = k.row(i).to_slice().expect("standard layout");
        t[i] = dot(row, wv);
        su_new[i] = relax_scaling(su[i], t[i], omega);
        axpy(a[i] * su_new[i], row, s);
    }
}

/// `x^(1-w) * t^(-w)` for positive `x`, `t`.
#[inline]
fn relax_scaling<T: Real>(x: T, t: T, w: T) -> T {
    if w == T::one() {
        T::one() / t
    } else {
        ((T::one() - w) * x.ln() - w * t.ln()).exp()
    }
}

fn out_of_range<T: Real>(xs: &[T]) -> bool {
    let hi = T::lit(ABSORB_LOG_THRESHOLD.exp());
    let lo = T::one() / hi;
    xs.iter().any(|&x| !(x < hi && x > lo))
}

struct RelaxationController<T> {
    mode: Relaxation<T>,
    omega: T,
    history: Vec<T>,
    baseline: T,
    refinements: usize,
    settled: bool,
    locked: bool,
}

impl<T: Real> RelaxationController<T> {
    const MAX_OMEGA: f64 = 1.9;
    const WINDOW: usize = 5;
    const WARMUP: usize = 12;
    const MAX_REFINEMENTS: usize = 3;

    fn new(mode: Relaxation<T>) -> Self {
        let omega = match mode {
            Relaxation::Fixed(w) => w,
            _ => T::one(),
        };
        Self {
            mode,
            omega,
            history: Vec::new(),
            baseline: T::infinity(),
            refinements: 0,
            settled: false,
            locked: false,
        }
    }

    fn omega(&self) -> T {
        self.omega
    }

    fn switch_to(&mut self, omega: T, err: T) {
        self.omega = omega.min(T::lit(Self::MAX_OMEGA));
        self.baseline = err;
        self.history.clear();
    }

    fn observe(&mut self, err: T) {
        if self.locked || matches!(self.mode, Relaxation::Off) {
            return;
        }
        if self.omega != T::one() {
            self.baseline = self.baseline.min(err);
            let limit = if matches!(self.mode, Relaxation::Fixed(_)) { 1e3 } else { 100.0 };
            if !err.is_finite() || err > T::lit(limit) * self.baseline {
                self.fall_back();
                return;
            }
        }
        if matches!(self.mode, Relaxation::Fixed(_)) || self.settled {
            return;
        }
        self.history.push(err);
        let k = self.history.len();
        if k < Self::WARMUP {
            return;
        }
        let ratio = self.history[k - 1] / self.history[k - 1 - Self::WINDOW];
        let rate = ratio.powf(T::one() / T::from_count(Self::WINDOW));
        if !(rate < T::one()) {
            return;
        }
        let one = T::one();
        if self.omega == one {
            if rate <= T::lit(0.3) {
                // Already fast.
                self.locked = true;
            } else {
                self.switch_to(T::lit(2.0) / (one + (one - rate).sqrt()), err);
            }
            return;
        }
        // Below the optimum, successive over-relaxation contracts at `r` with
        // `r + w - 1 = w mu sqrt(r)`, `mu^2` being the plain rate.
        let w = self.omega;
        if rate > T::lit(1.25) * (w - one) && self.refinements < Self::MAX_REFINEMENTS {
            let mu = (rate + w - one) / (w * rate.sqrt());
            let mu2 = (mu * mu).min(T::lit(0.9999));
            let next = T::lit(2.0) / (one + (one - mu2).sqrt());
            if next > w + T::lit(0.02) && w < T::lit(Self::MAX_OMEGA) {
                self.refinements += 1;
                self.switch_to(next, err);
                return;
            }
        }
        self.settled = true;
    }

    /// Plain updates from here on.
    fn fall_back(&mut self) {
        self.omega = T::one();
        self.locked = true;
    }
}

struct EngineState<T> {
    u: Array1<T>,
    v: Array1<T>,
    iterations: usize,
    diagnostics: Diagnostics,
    /// Last kernel of the stabilized scheme, reused by the final summary.
    kernel: Option<KernelState<T>>,
}

/// Kernel `exp((f_i + g_j - C_ij)/eps)` with pending scalings; the plan is
/// `a_i su_i K_ij sv_j b_j`.
struct KernelState<T> {
    kernel: Array2<T>,
    f: Array1<T>,
    g: Array1<T>,
    su: Vec<T>,
    sv: Vec<T>,
}

/// Largest exponent magnitude for which the kernel is built directly.
const DIRECT_KERNEL_SPAN: f64 = 500.0;

/// Absorbed potentials `(f, g)` and the kernel for a warm start `g0`. When the
/// exponents stay in range the kernel is built directly; otherwise one exact
/// log-domain sweep centers it first.
fn initial_kernel<T: Real>(p: &Problem<'_, T>, g0: Array1<T>) -> (Array1<T>, Array1<T>, Array2<T>) {
    let mut f = Array1::zeros(p.n());
    let mut g = g0;
    if let Some(kernel) = p.kernel_within(&f, &g, T::lit(DIRECT_KERNEL_SPAN)) {
        return (f, g, kernel);
    }
    p.u_update(&g, &mut f);
    p.v_update(&f, &mut g);
    let kernel = p.kernel(&f, &g);
    (f, g, kernel)
}

fn run_log_domain<T: Real>(
    p: &Problem<'_, T>,
    mut u: Array1<T>,
    mut v: Array1<T>,
    relaxation: Relaxation<T>,
    target: T,
    max_iterations: usize,
) -> EngineState<T> {
    let (n, m) = (p.n(), p.m());
    let mut ctl = RelaxationController::new(relaxation);
    let mut u_hat = Array1::zeros(n);
    let mut v_hat = Array1::zeros(m);
    let mut col_err = T::infinity();
    let mut it = 0;
    while it < max_iterations {
        p.u_update(&v, &mut u_hat);
        let row_err: T = (0..n)
            .map(|i| p.a[i] * (((u[i] - u_hat[i]) / p.eps).exp() - T::one()).abs())
            .sum();
        let err = row_err + col_err;
        if err <= target {
            break;
        }
        if it > 0 {
            ctl.observe(err);
        }
        let w = ctl.omega();
        for i in 0..n {
            u[i] = (T::one() - w) * u[i] + w * u_hat[i];
        }
        p.v_update(&u, &mut v_hat);
        for j in 0..m {
            v[j] = (T::one() - w) * v[j] + w * v_hat[j];
        }
        col_err = (0..m)
            .map(|j| p.b[j] * (((v[j] - v_hat[j]) / p.eps).exp() - T::one()).abs())
            .sum();
        it += 1;
    }
    EngineState {
        u,
        v,
        iterations: it,
        diagnostics: Diagnostics { final_relaxation: ctl.omega().as_f64(), ..Default::default() },
        kernel: None,
    }
}

fn run_stabilized<T: Real>(
    p: &Problem<'_, T>,
    _u0: Array1<T>,
    v0: Array1<T>,
    relaxation: Relaxation<T>,
    target: T,
    max_iterations: usize,
) -> EngineState<T> {
    let (n, m) = (p.n(), p.m());
    let mut diag = Diagnostics::default();
    let mut ctl = RelaxationController::new(relaxation);
    // Warm starts only need `v`.
    let (mut f, mut g, mut kernel) = initial_kernel(p, v0);
    let mut su = vec![T::one(); n];
    let mut sv = vec![T::one(); m];
    let mut t = vec![T::zero(); n];
    let mut s = vec![T::zero(); m];
    let mut w_buf = vec![T::zero(); n.max(m)];
    let mut su_next = vec![T::one(); n];
    let mut col_err = T::infinity();
    let mut it = 0;

    let absorb = |f: &mut Array1<T>, g: &mut Array1<T>, su: &mut [T], sv: &mut [T]| {
        for i in 0..n {
            f[i] += p.eps * su[i].ln();
            su[i] = T::one();
        }
        for j in 0..m {
            g[j] += p.eps * sv[j].ln();
            sv[j] = T::one();
        }
    };

    while it < max_iterations {
        for j in 0..m {
            w_buf[j] = p.b[j] * sv[j];
        }
        // Speculatively run the second half-step with the current factor; it
        // is redone below in the rare case the controller changes it.
        let w = ctl.omega();
        fused_sweep(&kernel, &w_buf[..m], &p.a, &su, w, &mut t, &mut su_next, &mut s);
        if t.iter().any(|&x| !(x > T::lit(TINY)) || !x.is_finite()) {
            absorb(&mut f, &mut g, &mut su, &mut sv);
            let mut fresh = Array1::zeros(n);
            p.u_update(&g, &mut fresh);
            f = fresh;
            p.refill_kernel(&f, &g, &mut kernel);
            diag.absorptions += 1;
            diag.log_domain_fallbacks += 1;
            col_err = T::infinity();
            it += 1;
            continue;
        }
        let row_err: T = (0..n).map(|i| p.a[i] * (su[i] * t[i] - T::one()).abs()).sum();
        let err = row_err + col_err;
        if err <= target {
            break;
        }
        if it > 0 {
            ctl.observe(err);
        }
        if !err.is_finite() && col_err.is_finite() || f.iter().chain(g.iter()).any(|x| !x.is_finite()) {
            // Over-relaxation diverged; restart plain from scratch.
            ctl.fall_back();
            g.fill(T::zero());
            p.u_update(&g, &mut f);
            p.v_update(&f, &mut g);
            su.fill(T::one());
            sv.fill(T::one());
            p.refill_kernel(&f, &g, &mut kernel);
            diag.absorptions += 1;
            col_err = T::infinity();
            it += 1;
            continue;
        }
        let w_spec = w;
        let w = ctl.omega();
        if w != w_spec {
            for i in 0..n {
                su_next[i] = relax_scaling(su[i], t[i], w);
                w_buf[i] = p.a[i] * su_next[i];
            }
            matvec_t(&kernel, &w_buf[..n], &mut s);
        }
        su.copy_from_slice(&su_next);
        if s.iter().any(|&x| !(x > T::lit(TINY)) || !x.is_finite()) {
            absorb(&mut f, &mut g, &mut su, &mut sv);
            let mut fresh = Array1::zeros(m);
            p.v_update(&f, &mut fresh);
            g = fresh;
            p.refill_kernel(&f, &g, &mut kernel);
            diag.absorptions += 1;
            diag.log_domain_fallbacks += 1;
            col_err = T::zero();
            it += 1;
            continue;
        }
        let mut ce = T::zero();
        for j in 0..m {
            sv[j] = relax_scaling(sv[j], s[j], w);
            ce += p.b[j] * (sv[j] * s[j] - T::one()).abs();
        }
        col_err = ce;
        if out_of_range(&su) || out_of_range(&sv) {
            absorb(&mut f, &mut g, &mut su, &mut sv);
            p.refill_kernel(&f, &g, &mut kernel);
            diag.absorptions += 1;
        }
        it += 1;
    }
    diag.final_relaxation = ctl.omega().as_f64();
    let u = (0..n).map(|i| f[i] + p.eps * su[i].ln()).collect();
    let v = (0..m).map(|j| g[j] + p.eps * sv[j].ln()).collect();
    EngineState {
        u,
        v,
        iterations: it,
        diagnostics: diag,
        kernel: Some(KernelState { kernel, f, g, su, sv }),
    }
}

fn run_scaling<T: Real>(
    p: &Problem<'_, T>,
    relaxation: Relaxation<T>,
    target: T,
    max_iterations: usize,
) -> EngineState<T> {
    let (n, m) = (p.n(), p.m());
    let kernel = p.kernel(&Array1::zeros(n), &Array1::zeros(m));
    let mut ctl = RelaxationController::new(relaxation);
    let mut su = vec![T::one(); n];
    let mut sv = vec![T::one(); m];
    let mut t = vec![T::zero(); n];
    let mut s = vec![T::zero(); m];
    let mut w_buf = vec![T::zero(); n.max(m)];
    let mut col_err = T::infinity();
    let mut it = 0;
    while it < max_iterations {
        for j in 0..m {
            w_buf[j] = p.b[j] * sv[j];
        }
        matvec(&kernel, &w_buf[..m], &mut t);
        let row_err: T = (0..n).map(|i| p.a[i] * (su[i] * t[i] - T::one()).abs()).sum();
        let err = row_err + col_err;
        if err <= target || !err.is_finite() && it > 0 {
            break;
        }
        if it > 0 {
            ctl.observe(err);
        }
        let w = ctl.omega();
        for i in 0..n {
            su[i] = relax_scaling(su[i], t[i], w);
            w_buf[i] = p.a[i] * su[i];
        }
        matvec_t(&kernel, &w_buf[..n], &mut s);
        let mut ce = T::zero();
        for j in 0..m {
            sv[j] = relax_scaling(sv[j], s[j], w);
            ce += p.b[j] * (sv[j] * s[j] - T::one()).abs();
        }
        col_err = ce;
        it += 1;
    }
    scratch::recycle(kernel);
    let u = su.iter().map(|&x| p.eps * x.ln()).collect();
    let v = sv.iter().map(|&x| p.eps * x.ln()).collect();
    EngineState {
        u,
        v,
        iterations: it,
        diagnostics: Diagnostics { final_relaxation: ctl.omega().as_f64(), ..Default::default() },
        kernel: None,
    }
}

fn run_engine<T: Real>(
    p: &Problem<'_, T>,
    u: Array1<T>,
    v: Array1<T>,
    cfg: &SinkhornConfig<T>,
    target: T,
    max_iterations: usize,
) -> EngineState<T> {
    match cfg.scheme {
        Scheme::LogDomain => run_log_domain(p, u, v, cfg.relaxation, target, max_iterations),
        Scheme::Stabilized => run_stabilized(p, u, v, cfg.relaxation, target, max_iterations),
        Scheme::Scaling => run_scaling(p, cfg.relaxation, target, max_iterations),
    }
}

struct Summary<T> {
    marginal_error: T,
    transport_cost: T,
    entropy: T,
    mass: T,
}

/// Statistics of the plan with `log(pi_ij / (a_i b_j)) = hu_i + hv_j - C_ij / eps`.
/// `entries(i, log_ratios, out)` writes row `i` of the plan into `out`.
fn summarize_with<T: Real>(
    p: &Problem<'_, T>,
    hu: &[T],
    hv: &[T],
    entries: impl Fn(usize, &[T], &mut [T]),
) -> Summary<T> {
    let (n, m) = (p.n(), p.m());
    let inv = T::one() / p.eps;
    let mut cols = vec![T::zero(); m];
    let mut lr = vec![T::zero(); m];
    let mut pi = vec![T::zero(); m];
    let mut row_err = T::zero();
    let mut transport = T::zero();
    let mut entropy = T::zero();
    let mut mass = T::zero();
    for i in 0..n {
        let row = p.row(i);
        for j in 0..m {
            lr[j] = hu[i] + hv[j] - row[j] * inv;
        }
        entries(i, &lr, &mut pi);
        let (mut r, mut tc, mut ent) = (T::zero(), T::zero(), T::zero());
        for j in 0..m {
            let pij = pi[j];
            r += pij;
            cols[j] += pij;
            tc += pij * row[j];
            ent += pij * lr[j];
        }
        row_err += (r - p.a[i]).abs();
        transport += tc;
        entropy += ent;
        mass += r;
    }
    let col_err: T = (0..m).map(|j| (cols[j] - p.b[j]).abs()).sum();
    Summary { marginal_error: row_err + col_err, transport_cost: transport, entropy, mass }
}

/// Exact log-domain statistics of the plan induced by `(u, v)`.
fn summarize<T: Real>(p: &Problem<'_, T>, u: &Array1<T>, v: &Array1<T>) -> Summary<T> {
    let inv = T::one() / p.eps;
    let hu: Vec<T> = u.iter().map(|&x| x * inv).collect();
    let hv: Vec<T> = v.iter().map(|&x| x * inv).collect();
    summarize_with(p, &hu, &hv, |i, lr, out| {
        for j in 0..out.len() {
            out[j] = (p.log_a[i] + p.log_b[j] + lr[j]).exp();
        }
    })
}

/// Same statistics read off a stabilized kernel, without exponentials.
fn summarize_kernel<T: Real>(p: &Problem<'_, T>, ks: &KernelState<T>) -> Summary<T> {
    let inv = T::one() / p.eps;
    let hu: Vec<T> = (0..p.n()).map(|i| ks.f[i] * inv + ks.su[i].ln()).collect();
    let hv: Vec<T> = (0..p.m()).map(|j| ks.g[j] * inv + ks.sv[j].ln()).collect();
    let left: Vec<T> = (0..p.n()).map(|i| p.a[i] * ks.su[i]).collect();
    let right: Vec<T> = (0..p.m()).map(|j| p.b[j] * ks.sv[j]).collect();
    summarize_with(p, &hu, &hv, |i, _, out| {
        let k = ks.kernel.row(i).to_slice().expect("kernel in standard layout");
        for j in 0..out.len() {
            out[j] = left[i] * k[j] * right[j];
        }
    })
}

fn finalize<T: Real>(
    p: &Problem<'_, T>,
    mut state: EngineState<T>,
    cfg: &SinkhornConfig<T>,
) -> SinkhornResult<T> {
    let shift = match cfg.anchoring {
        Anchoring::MeanZeroU => state.u.iter().zip(p.a.iter()).map(|(&u, &a)| u * a).sum(),
        Anchoring::FirstPointZero => state.u[0],
    };
    state.u.mapv_inplace(|x| x - shift);
    state.v.mapv_inplace(|x| x + shift);
    let s = match state.kernel.take() {
        Some(ks) => {
            let s = summarize_kernel(p, &ks);
            scratch::recycle(ks.kernel);
            s
        }
        None => summarize(p, &state.u, &state.v),
    };
    let dual = state.u.iter().zip(p.a.iter()).map(|(&u, &a)| u * a).sum::<T>()
        + state.v.iter().zip(p.b.iter()).map(|(&v, &b)| v * b).sum::<T>()
        - p.eps * s.mass
        + p.eps;
    SinkhornResult {
        potentials: DualPotentials { u: state.u, v: state.v },
        epsilon: p.eps,
        iterations: state.iterations,
        marginal_error: s.marginal_error,
        converged: s.marginal_error <= cfg.marginal_tolerance,
        primal_value: s.transport_cost + p.eps * s.entropy,
        dual_value: dual,
        transport_cost: s.transport_cost,
        entropy: s.entropy,
        diagnostics: state.diagnostics,
        log_a: p.log_a.clone(),
        log_b: p.log_b.clone(),
    }
}

fn merge(total: &mut Diagnostics, part: &Diagnostics) {
    total.absorptions += part.absorptions;
    total.log_domain_fallbacks += part.log_domain_fallbacks;
    total.newton_steps += part.newton_steps;
    total.final_relaxation = part.final_relaxation;
}

/// Solves the entropic problem on weight vectors directly.
pub(crate) fn solve_weights<T: Real>(
    cost: &Array2<T>,
    a: &Array1<T>,
    b: &Array1<T>,
    cfg: &SinkhornConfig<T>,
) -> Result<SinkhornResult<T>> {
    cfg.validate()?;
    let p = Problem::new(cost, a, b, cfg.epsilon)?;
    let (n, m) = (p.n(), p.m());
    let mut u = Array1::zeros(n);
    let mut v = Array1::zeros(m);
    let mut iterations = 0;
    let mut diag = Diagnostics::default();

    if let Some(schedule) = cfg.annealing {
        let mut eps = schedule.start.max(cfg.epsilon);
        let stage_tol = cfg.marginal_tolerance.max(T::lit(ANNEALING_STAGE_TOLERANCE));
        while eps > cfg.epsilon && iterations < cfg.max_iterations {
            let stage = p.with_eps(eps);
            let st = run_engine(&stage, u, v, cfg, stage_tol, cfg.max_iterations - iterations);
            iterations += st.iterations;
            merge(&mut diag, &st.diagnostics);
            u = st.u;
            v = st.v;
            eps = eps * schedule.factor;
        }
    }

    // The engine's running error estimate and the exact summary can differ in
    // the last digits; aim below the tolerance and re-enter if needed.
    let newton_ok = cfg.newton && n + m <= NEWTON_SIZE_CAP;
    let mut tried_newton = false;
    let mut target = cfg.marginal_tolerance * T::lit(0.5);
    let mut rounds = 0;
    let mut result = loop {
        let mut budget = cfg.max_iterations.saturating_sub(iterations);
        if newton_ok && !tried_newton {
            budget = budget.min(NEWTON_AFTER);
        }
        let st = run_engine(&p, u, v, cfg, target, budget);
        iterations += st.iterations;
        merge(&mut diag, &st.diagnostics);
        let state = EngineState { u: st.u, v: st.v, iterations, diagnostics: diag, kernel: st.kernel };
        let mut result = finalize(&p, state, cfg);
        rounds += 1;
        if result.converged || iterations >= cfg.max_iterations {
            break result;
        }
        if newton_ok && !tried_newton {
            tried_newton = true;
            let budget = NEWTON_MAX_STEPS.min(cfg.max_iterations - iterations);
            let out = newton::polish(&p, &result.potentials.u, &result.potentials.v, target, budget);
            iterations += out.steps;
            diag.newton_steps += out.steps;
            let state = EngineState { u: out.u, v: out.v, iterations, diagnostics: diag, kernel: None };
            let candidate = finalize(&p, state, cfg);
            if candidate.marginal_error.is_finite()
                && candidate.marginal_error < result.marginal_error
            {
                result = candidate;
            }
            result.iterations = iterations;
            result.diagnostics = diag;
            if result.converged || iterations >= cfg.max_iterations {
                break result;
            }
        } else if rounds >= 4 {
            break result;
        } else {
            target = target * T::lit(0.1);
        }
        u = result.potentials.u.clone();
        v = result.potentials.v.clone();
    };
    result.iterations = iterations;
    Ok(result)
}

/// Entropic OT between two discrete measures with a precomputed cost matrix.
///
/// A run that exhausts `max_iterations` still returns its values with
/// `converged == false`.
pub fn sinkhorn_solve<T: Real>(
    cost: &Array2<T>,
    a: &DiscreteMeasure<T>,
    b: &DiscreteMeasure<T>,
    cfg: &SinkhornConfig<T>,
) -> Result<SinkhornResult<T>> {
    if cost.dim() != (a.len(), b.len()) {
        return Err(Error::DimensionMismatch { expected: a.len(), got: cost.nrows() });
    }
    solve_weights(cost, a.weights(), b.weights(), cfg)
}

fn run_symmetric_log<T: Real>(
    p: &Problem<'_, T>,
    target: T,
    max_iterations: usize,
) -> EngineState<T> {
    let n = p.n();
    let mut f = Array1::zeros(n);
    let mut f_hat = Array1::zeros(n);
    let mut it = 0;
    while it < max_iterations {
        p.u_update(&f, &mut f_hat);
        let err: T = T::lit(2.0)
            * (0..n)
                .map(|i| p.a[i] * (((f[i] - f_hat[i]) / p.eps).exp() - T::one()).abs())
                .sum::<T>();
        if it > 0 && err <= target {
            break;
        }
        for i in 0..n {
            f[i] = if it == 0 { f_hat[i] } else { T::lit(0.5) * (f[i] + f_hat[i]) };
        }
        it += 1;
    }
    EngineState {
        u: f.clone(),
        v: f,
        iterations: it,
        diagnostics: Diagnostics { final_relaxation: 0.5, ..Default::default() },
        kernel: None,
    }
}

/// Step size of the symmetric iteration `f <- f + theta (T f - f)`, where `T`
/// is followed by the mass normalization that removes the constant mode.
///
/// With `P` the row-normalized Gibbs kernel, the linearized map has
/// eigenvalues `1 - theta (1 + lambda)` over the non-trivial spectrum of `P`.
/// `theta = 1` is optimal for a flat spectrum (large `eps`); a slow observed
/// rate `rho` at `theta = 1` signals `lambda_max ~ rho` and switches to
/// `theta = 2 / (2 + rho)`. Any `theta` in `(0, 1]` converges.
struct SymmetricStep<T> {
    theta: T,
    history: Vec<T>,
    best: T,
    locked: bool,
}

impl<T: Real> SymmetricStep<T> {
    fn new() -> Self {
        Self { theta: T::one(), history: Vec::new(), best: T::infinity(), locked: false }
    }

    fn observe(&mut self, err: T) {
        self.best = self.best.min(err);
        if !err.is_finite() || err > T::lit(100.0) * self.best {
            self.theta = T::lit(0.5);
            self.locked = true;
            return;
        }
        if self.locked {
            return;
        }
        self.history.push(err);
        let k = self.history.len();
        if k >= 8 {
            let rate = (self.history[k - 1] / self.history[k - 6]).powf(T::lit(0.2));
            if !(rate <= T::lit(0.5)) {
                let rho = if rate < T::one() { rate } else { T::one() };
                self.theta = T::lit(2.0) / (T::lit(2.0) + rho);
                self.locked = true;
            }
        }
    }
}

fn run_symmetric_stabilized<T: Real>(
    p: &Problem<'_, T>,
    target: T,
    max_iterations: usize,
) -> EngineState<T> {
    let n = p.n();
    let mut diag = Diagnostics::default();
    let mut f = Array1::zeros(n);
    let mut it = 0;
    let symmetric = p.cost_is_symmetric();
    let fill = |f: &Array1<T>, limit: T, k: &mut Array2<T>| {
        if symmetric {
            p.fill_kernel_symmetric(f, limit, k)
        } else {
            p.fill_kernel(f, f, limit, k)
        }
    };
    let mut kernel = scratch::matrix(n, n);
    if !fill(&f, T::lit(DIRECT_KERNEL_SPAN), &mut kernel) {
        // Centre the exponents with one exact averaged step.
        let mut fresh = Array1::zeros(n);
        p.u_update(&f, &mut fresh);
        f = fresh * T::lit(0.5);
        it = 1;
        fill(&f, T::infinity(), &mut kernel);
    }
    let mut step = SymmetricStep::new();
    let mut s = vec![T::one(); n];
    let mut t = vec![T::zero(); n];
    let mut w = vec![T::zero(); n];
    let absorb = |f: &mut Array1<T>, s: &mut [T]| {
        for i in 0..n {
            f[i] += p.eps * s[i].ln();
            s[i] = T::one();
        }
    };
    while it < max_iterations {
        for i in 0..n {
            w[i] = p.a[i] * s[i];
        }
        matvec(&kernel, &w, &mut t);
        let mass: T = w.iter().zip(&t).map(|(&x, &y)| x * y).sum();
        if t.iter().any(|&x| !(x > T::lit(TINY)) || !x.is_finite()) || !(mass > T::zero()) || !mass.is_finite() {
            absorb(&mut f, &mut s);
            let mut f_hat = Array1::zeros(n);
            p.u_update(&f, &mut f_hat);
            f = (&f + &f_hat) * T::lit(0.5);
            fill(&f, T::infinity(), &mut kernel);
            diag.absorptions += 1;
            diag.log_domain_fallbacks += 1;
            it += 1;
            continue;
        }
        // Total mass one: scale s, and with it t, by mass^(-1/2).
        let scale = mass.sqrt().recip();
        for i in 0..n {
            s[i] *= scale;
            t[i] *= scale;
        }
        let err: T =
            T::lit(2.0) * (0..n).map(|i| p.a[i] * (s[i] * t[i] - T::one()).abs()).sum::<T>();
        if err <= target {
            break;
        }
        step.observe(err);
        let theta = step.theta;
        for i in 0..n {
            s[i] = relax_scaling(s[i], t[i], theta);
        }
        if out_of_range(&s) {
            absorb(&mut f, &mut s);
            fill(&f, T::infinity(), &mut kernel);
            diag.absorptions += 1;
        }
        it += 1;
    }
    diag.final_relaxation = step.theta.as_f64();
    let u: Array1<T> = (0..n).map(|i| f[i] + p.eps * s[i].ln()).collect();
    EngineState {
        u: u.clone(),
        v: u,
        iterations: it,
        diagnostics: diag,
        kernel: Some(KernelState { kernel, g: f.clone(), f, su: s.clone(), sv: s }),
    }
}

/// `W_eps(a, a)` for a symmetric cost through the averaged fixed point
/// `f <- (f + T(f)) / 2`, which keeps `u = v` at every step.
pub fn sinkhorn_solve_symmetric<T: Real>(
    cost: &Array2<T>,
    a: &DiscreteMeasure<T>,
    cfg: &SinkhornConfig<T>,
) -> Result<SinkhornResult<T>> {
    if cost.dim() != (a.len(), a.len()) {
        return Err(Error::DimensionMismatch { expected: a.len(), got: cost.nrows() });
    }
    solve_symmetric_weights(cost, a.weights(), cfg)
}

pub(crate) fn solve_symmetric_weights<T: Real>(
    cost: &Array2<T>,
    a: &Array1<T>,
    cfg: &SinkhornConfig<T>,
) -> Result<SinkhornResult<T>> {
    cfg.validate()?;
    let p = Problem::new(cost, a, a, cfg.epsilon)?;
    let target = cfg.marginal_tolerance * T::lit(0.5);
    let st = match cfg.scheme {
        Scheme::LogDomain => run_symmetric_log(&p, target, cfg.max_iterations),
        Scheme::Stabilized => run_symmetric_stabilized(&p, target, cfg.max_iterations),
        // No symmetric variant of the unstabilized kernel.
        Scheme::Scaling => return solve_weights(cost, a, a, cfg),
    };
    let result = finalize(&p, st, cfg);
    if result.converged || !cfg.newton || 2 * p.n() > NEWTON_SIZE_CAP {
        return Ok(result);
    }
    let (u, v) = (&result.potentials.u, &result.potentials.v);
    let out = newton::polish(&p, u, v, target, NEWTON_MAX_STEPS);
    let mut diag = result.diagnostics;
    diag.newton_steps += out.steps;
    let iterations = result.iterations + out.steps;
    let candidate = finalize(&p, EngineState { u: out.u, v: out.v, iterations, diagnostics: diag, kernel: None }, cfg);
    Ok(if candidate.marginal_error < result.marginal_error { candidate } else { result })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{cost_matrix, Domain, DiscreteMeasure, GroundCost, Sampler};
    use crate::sinkhorn::Annealing;
    use ndarray::array;

    fn two_point() -> (DiscreteMeasure<f64>, DiscreteMeasure<f64>, Array2<f64>) {
        let dom = Domain::interval(0.0, 3.0).unwrap();
        let a = DiscreteMeasure::uniform_1d(&[0.0, 1.0], dom.clone()).unwrap();
        let b = DiscreteMeasure::uniform_1d(&[2.0, 3.0], dom).unwrap();
        let c = cost_matrix(&GroundCost::SquaredEuclidean, &a, &b).unwrap();
        (a, b, c)
    }

    /// Independent oracle: plans in Pi(a, b) for the 2x2 uniform problem are
    /// `[[t, 1/2 - t], [1/2 - t, t]]`; minimize the 1-D objective by golden
    /// section search.
    fn two_point_oracle(eps: f64) -> f64 {
        let obj = |t: f64| {
            let xlogx = |p: f64| if p > 0.0 { p * (p / 0.25).ln() } else { 0.0 };
            let cost = t * 4.0 + (0.5 - t) * 9.0 + (0.5 - t) * 1.0 + t * 4.0;
            cost + eps * (2.0 * xlogx(t) + 2.0 * xlogx(0.5 - t))
        };
        let (mut lo, mut hi) = (0.0_f64, 0.5_f64);
        let g = (5.0_f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let x1 = hi - g * (hi - lo);
            let x2 = lo + g * (hi - lo);
            if obj(x1) < obj(x2) {
                hi = x2;
            } else {
                lo = x1;
            }
        }
        obj(0.5 * (lo + hi))
    }

    #[test]
    fn oracle_closed_form() {
        // Stationarity gives t = e / (2 (1 + e)) at eps = 1.
        let e = std::f64::consts::E;
        let t = e / (2.0 * (1.0 + e));
        let val = (5.0 - 2.0 * t) + 2.0 * t * (4.0 * t).ln() + 2.0 * (0.5 - t) * (4.0 * (0.5 - t)).ln();
        assert!((two_point_oracle(1.0) - val).abs() < 1e-12);
        assert!((val - 4.379_885_493).abs() < 1e-9, "{val}");
    }

    #[test]
    fn single_atoms_force_product_plan() {
        let dom = Domain::<f64>::interval(0.0, 1.0).unwrap();
        let a = DiscreteMeasure::dirac(&[0.0], dom.clone()).unwrap();
        let b = DiscreteMeasure::dirac(&[1.0], dom).unwrap();
        let c = cost_matrix(&GroundCost::SquaredEuclidean, &a, &b).unwrap();
        for eps in [1e-3, 1.0, 1e3] {
            for scheme in [Scheme::LogDomain, Scheme::Stabilized] {
                let r = sinkhorn_solve(&c, &a, &b, &SinkhornConfig::new(eps).with_scheme(scheme)).unwrap();
                assert!((r.entropic_cost() - 1.0).abs() < 1e-12);
                assert!(r.entropy.abs() < 1e-12);
                assert!((r.plan(&c)[[0, 0]] - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_point_instance_matches_oracle() {
        let (a, b, c) = two_point();
        for scheme in [Scheme::LogDomain, Scheme::Stabilized, Scheme::Scaling] {
            let r = sinkhorn_solve(&c, &a, &b, &SinkhornConfig::new(1.0).with_scheme(scheme)).unwrap();
            assert!(r.converged);
            assert!((r.primal_value - two_point_oracle(1.0)).abs() < 1e-8, "{scheme:?}");
            assert!((r.dual_value - two_point_oracle(1.0)).abs() < 1e-8);
            let plan = r.plan(&c);
            let t = std::f64::consts::E / (2.0 * (1.0 + std::f64::consts::E));
            assert!((plan[[0, 0]] - t).abs() < 1e-8);
        }
        let big = sinkhorn_solve(&c, &a, &b, &SinkhornConfig::new(1e3)).unwrap();
        assert!((big.entropic_cost() - 4.5).abs() < 0.02);
        assert!((big.entropic_cost() - two_point_oracle(1e3)).abs() < 1e-8);
    }

    #[test]
    fn anchoring_rules_agree_up_to_shift() {
        let s = Sampler::<f64>::uniform_hypercube(2, 1.0, 5).unwrap();
        let a = s.sample(30).unwrap();
        let b = s.with_seed(6).sample(25).unwrap();
        let c = cost_matrix(&GroundCost::SquaredEuclidean, &a, &b).unwrap();
        let r1 = sinkhorn_solve(&c, &a, &b, &SinkhornConfig::new(0.1)).unwrap();
        let r2 = sinkhorn_solve(
            &c,
            &a,
            &b,
            &SinkhornConfig::new(0.1).with_anchoring(Anchoring::FirstPointZero),
        )
        .unwrap();
        assert!(r2.potentials.u[0] == 0.0);
        let mean: f64 = r1.potentials.u.iter().zip(a.weights()).map(|(u, w)| u * w).sum();
        assert!(mean.abs() < 1e-14);
        assert!((r1.primal_value - r2.primal_value).abs() < 1e-10);
        assert!((r1.dual_value - r2.dual_value).abs() < 1e-10);
        let shift = r1.potentials.u[0] - r2.potentials.u[0];
        for (x, y) in r1.potentials.v.iter().zip(&r2.potentials.v) {
            assert!((x - y + shift).abs() < 1e-10);
        }
    }

    #[test]
    fn schemes_reach_the_same_fixed_point() {
        let s = Sampler::<f64>::uniform_hypercube(3, 1.0, 9).unwrap();
        let a = s.sample(40).unwrap();
        let b = s.with_seed(10).sample(35).unwrap();
        let c = cost_matrix(&GroundCost::SquaredEuclidean, &a, &b).unwrap();
        let base = sinkhorn_solve(&c, &a, &b, &SinkhornConfig::new(0.5).with_scheme(Scheme::LogDomain)).unwrap();
        for cfg in [
            SinkhornConfig::new(0.5),
            SinkhornConfig::new(0.5).with_scheme(Scheme::Scaling),
            SinkhornConfig::new(0.5).with_relaxation(Relaxation::Off),
            SinkhornConfig::new(0.5).with_relaxation(Relaxation::Fixed(1.5)),
            SinkhornConfig::new(0.5).with_annealing(Annealing { start: 10.0, factor: 0.5 }),
        ] {
            let r = sinkhorn_solve(&c, &a, &b, &cfg).unwrap();
            assert!(r.converged, "{cfg:?}");
            assert!((r.primal_value - base.primal_value).abs() < 1e-9, "{cfg:?}");
            for (x, y) in r.potentials.u.iter().zip(&base.potentials.u) {
                assert!((x - y).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn small_epsilon_stays_finite() {
        let s = Sampler::<f64>::uniform_hypercube(2, 1.0, 1).unwrap();
        let a = s.sample(200).unwrap();
        let b = s.with_seed(2).sample(200).unwrap();
        let c = cost_matrix(&GroundCost::SquaredEuclidean, &a, &b).unwrap();
        for scheme in [Scheme::Stabilized, Scheme::LogDomain] {
            let r = sinkhorn_solve(&c, &a, &b, &SinkhornConfig::new(1e-3).with_scheme(scheme)).unwrap();
            assert!(r.primal_value.is_finite() && r.dual_value.is_finite());
            assert!(r.potentials.u.iter().chain(r.potentials.v.iter()).all(|x| x.is_finite()));
            assert!(r.plan(&c).iter().all(|x| x.is_finite() && *x >= 0.0));
        }
        let tiny = sinkhorn_solve(&c, &a, &b, &SinkhornConfig::new(1e-4).with_max_iterations(50)).unwrap();
        assert!(tiny.primal_value.is_finite() && tiny.marginal_error.is_finite());
    }

    #[test]
    fn unconverged_runs_are_flagged() {
        let s = Sampler::<f64>::uniform_hypercube(2, 1.0, 3).unwrap();
        let a = s.sample(50).unwrap();
        let b = s.with_seed(4).sample(50).unwrap();
        let c = cost_matrix(&GroundCost::SquaredEuclidean, &a, &b).unwrap();
        let r = sinkhorn_solve(&c, &a, &b, &SinkhornConfig::new(0.01).with_max_iterations(2)).unwrap();
        assert!(!r.converged);
        assert!(r.iterations <= 2);
        assert!(r.primal_value.is_finite());
    }

    #[test]
    fn invalid_configuration() {
        let (a, b, c) = two_point();
        for eps in [0.0, -1.0, f64::NAN] {
            assert!(matches!(
                sinkhorn_solve(&c, &a, &b, &SinkhornConfig::new(eps)),
                Err(Error::InvalidArgument(_))
            ));
        }
        let zero = DiscreteMeasure::weighted_1d(&[0.0, 1.0], &[1.0, 0.0], a.domain().clone()).unwrap();
        assert!(sinkhorn_solve(&c, &zero, &b, &SinkhornConfig::new(1.0)).is_err());
        let stripped = zero.strip_zero_weights();
        let c2 = cost_matrix(&GroundCost::SquaredEuclidean, &stripped, &b).unwrap();
        assert!(sinkhorn_solve(&c2, &stripped, &b, &SinkhornConfig::new(1.0)).is_ok());
    }

    #[test]
    fn symmetric_solver_matches_general_solver() {
        let a = Sampler::<f64>::uniform_hypercube(2, 1.0, 21).unwrap().sample(60).unwrap();
        let c = cost_matrix(&GroundCost::SquaredEuclidean, &a, &a).unwrap();
        for eps in [0.01, 0.1, 1.0, 10.0] {
            let general = sinkhorn_solve(&c, &a, &a, &SinkhornConfig::new(eps)).unwrap();
            for scheme in [Scheme::Stabilized, Scheme::LogDomain] {
                let sym = sinkhorn_solve_symmetric(&c, &a, &SinkhornConfig::new(eps).with_scheme(scheme)).unwrap();
                assert!(sym.converged, "eps {eps}");
                assert!((sym.primal_value - general.primal_value).abs() < 1e-9, "eps {eps}");
                let gap = sym.potentials.u[0] - sym.potentials.v[0];
                for (x, y) in sym.potentials.u.iter().zip(&sym.potentials.v) {
                    assert!((x - y - gap).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn kernel_products() {
        let k = array![[1.0, 2.0], [3.0, 4.0]];
        let mut out = [0.0; 2];
        matvec(&k, &[1.0, 1.0], &mut out);
        assert_eq!(out, [3.0, 7.0]);
        matvec_t(&k, &[1.0, 1.0], &mut out);
        assert_eq!(out, [4.0, 6.0]);
        let x: Vec<f64> = (0..19).map(f64::from).collect();
        assert_eq!(dot(&x, &x), x.iter().map(|v| v * v).sum::<f64>());
    }
}
