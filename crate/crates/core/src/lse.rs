//! Shifted log-sum-exp reductions over dense cost matrices.
//!
//! Every softmin evaluates `exp(a − max)` with `a − max ≤ 0`, so the
//! exponential only ever sees nonpositive arguments. [`exp_nonpos`] is a
//! branch-free evaluation on that half-line that the compiler can
//! vectorize; arguments below −708 flush to e^{−708} ≈ 3·10⁻³⁰⁸, which is
//! negligible next to the unit leading term of every shifted sum.
//!
//! Sums use eight interleaved accumulators combined in a fixed order, so
//! results are bit-identical from run to run.

const LOG2E: f64 = std::f64::consts::LOG2_E;
const LN2_HI: f64 = 6.931_471_803_691_238_164_90e-1;
const LN2_LO: f64 = 1.908_214_929_270_587_700_02e-10;
// 1.5 · 2⁵²: adding it rounds to the nearest integer in the low mantissa bits.
const ROUND_SHIFTER: f64 = 6_755_399_441_055_744.0;

const LANES: usize = 32;

/// e^x for x ≤ 0, accurate to a few ulp.
#[inline(always)]
pub(crate) fn exp_nonpos(x: f64) -> f64 {
    // written as a comparison so that NaN propagates
    let x = if x < -708.0 { -708.0 } else { x };
    exp_reduced(x)
}

/// e^x with the argument clamped to [−708, 709].
#[inline(always)]
pub(crate) fn exp_clamped(x: f64) -> f64 {
    let x = if x < -708.0 { -708.0 } else { x };
    let x = if x > 709.0 { 709.0 } else { x };
    exp_reduced(x)
}

#[inline(always)]
fn exp_reduced(x: f64) -> f64 {
    let mut b = [x; 1];
    exp_block(&mut b);
    b[0]
}

/// In-place e^x over a block, with every step written lane by lane so the
/// whole block maps onto vector registers. Arguments must lie in [−708, 709].
#[inline(always)]
fn exp_block<const L: usize>(x: &mut [f64; L]) {
    let mut t = [0.0; L];
    let mut r = [0.0; L];
    for l in 0..L {
        t[l] = mul_add(x[l], LOG2E, ROUND_SHIFTER);
        let k = t[l] - ROUND_SHIFTER;
        r[l] = mul_add(-k, LN2_LO, mul_add(-k, LN2_HI, x[l]));
    }
    // Taylor series of e^r on |r| ≤ ln2/2; truncation error below 2⁻⁵⁵.
    const COEFFS: [f64; 13] = [
        1.0 / 479_001_600.0,
        1.0 / 39_916_800.0,
        1.0 / 3_628_800.0,
        1.0 / 362_880.0,
        1.0 / 40_320.0,
        1.0 / 5_040.0,
        1.0 / 720.0,
        1.0 / 120.0,
        1.0 / 24.0,
        1.0 / 6.0,
        0.5,
        1.0,
        1.0,
    ];
    let mut p = [1.0 / 6_227_020_800.0; L];
    for c in COEFFS {
        for l in 0..L {
            p[l] = mul_add(p[l], r[l], c);
        }
    }
    for l in 0..L {
        let k_bits = t[l].to_bits().wrapping_sub(ROUND_SHIFTER.to_bits());
        x[l] = p[l] * f64::from_bits(k_bits.wrapping_add(1023) << 52);
    }
}

/// `a · b + c`, fused when the target has hardware FMA.
#[inline(always)]
fn mul_add(a: f64, b: f64, c: f64) -> f64 {
    if cfg!(target_feature = "fma") {
        a.mul_add(b, c)
    } else {
        a * b + c
    }
}

#[inline(always)]
fn clamp_block<const L: usize>(x: &mut [f64; L]) {
    for v in x.iter_mut() {
        *v = if *v < -708.0 { -708.0 } else { *v };
        *v = if *v > 709.0 { 709.0 } else { *v };
    }
}

/// Fixed-order reduction of a lane accumulator.
#[inline(always)]
fn sum_lanes(acc: &[f64; LANES]) -> f64 {
    let mut buf = *acc;
    let mut width = LANES;
    while width > 1 {
        width /= 2;
        for l in 0..width {
            buf[l] += buf[l + width];
        }
    }
    buf[0]
}

/// `Σⱼ exp(wⱼ − scale · cⱼ − shift)` over a row, blockwise.
#[inline(always)]
fn shifted_row_sum(w: &[f64], cost_row: &[f64], scale: f64, shift: f64) -> f64 {
    let mut acc = [0.0f64; LANES];
    let wc = w.chunks_exact(LANES);
    let cc = cost_row.chunks_exact(LANES);
    let (wr, cr) = (wc.remainder(), cc.remainder());
    for (a, c) in wc.zip(cc) {
        let mut x = [0.0; LANES];
        for l in 0..LANES {
            x[l] = a[l] - scale * c[l] - shift;
        }
        clamp_block(&mut x);
        exp_block(&mut x);
        for l in 0..LANES {
            acc[l] += x[l];
        }
    }
    let mut s = sum_lanes(&acc);
    for (a, c) in wr.iter().zip(cr) {
        s += exp_clamped(a - scale * c - shift);
    }
    s
}

/// `log Σⱼ exp(wⱼ − sⱼ)` where `s = scale · cost_row`.
///
/// `w` must not contain `+∞`; the maximum is subtracted before exponentiating.
#[inline]
pub(crate) fn row_lse(w: &[f64], cost_row: &[f64], scale: f64) -> f64 {
    debug_assert_eq!(w.len(), cost_row.len());
    let mut mx = [f64::NEG_INFINITY; LANES];
    let wc = w.chunks_exact(LANES);
    let cc = cost_row.chunks_exact(LANES);
    let (wr, cr) = (wc.remainder(), cc.remainder());
    for (a, c) in wc.zip(cc) {
        for l in 0..LANES {
            mx[l] = mx[l].max(a[l] - scale * c[l]);
        }
    }
    let mut m = mx.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for (a, c) in wr.iter().zip(cr) {
        m = m.max(a - scale * c);
    }
    if !m.is_finite() {
        return m;
    }
    m + shifted_row_sum(w, cost_row, scale, m).ln()
}

/// Column-wise `log Σᵢ exp(wᵢ − scale · c_ij)` for a row-major `rows × cols`
/// matrix, streamed row by row.
pub(crate) fn col_lse(w: &[f64], cost: &[f64], cols: usize, scale: f64, out: &mut [f64]) {
    debug_assert_eq!(out.len(), cols);
    let mut mx = vec![f64::NEG_INFINITY; cols];
    for (wi, row) in w.iter().zip(cost.chunks_exact(cols)) {
        for (m, c) in mx.iter_mut().zip(row) {
            *m = m.max(wi - scale * c);
        }
    }
    out.iter_mut().for_each(|x| *x = 0.0);
    for (wi, row) in w.iter().zip(cost.chunks_exact(cols)) {
        accumulate_row(out, row, scale, *wi, &mx);
    }
    for (o, m) in out.iter_mut().zip(&mx) {
        *o = m + o.ln();
    }
}

/// A shifted sum inside this range was computed without overflow or
/// significant underflow, so `shift + ln(sum)` is accurate.
pub(crate) fn sum_is_safe(s: f64) -> bool {
    (1e-250..=1e250).contains(&s)
}

/// `Σⱼ exp(wⱼ − scale · cⱼ − shift)` in a single pass; check the result with
/// [`sum_is_safe`].
#[inline]
pub(crate) fn row_sum_shifted(w: &[f64], cost_row: &[f64], scale: f64, shift: f64) -> f64 {
    debug_assert_eq!(w.len(), cost_row.len());
    shifted_row_sum(w, cost_row, scale, shift)
}

/// `accⱼ += exp(wᵢ − scale · cⱼ − shiftⱼ)` for one matrix row.
#[inline]
pub(crate) fn accumulate_row(acc: &mut [f64], cost_row: &[f64], scale: f64, wi: f64, shift: &[f64]) {
    let ac = acc.chunks_exact_mut(LANES);
    let cc = cost_row.chunks_exact(LANES);
    let sc = shift.chunks_exact(LANES);
    for ((a, c), s) in ac.zip(cc).zip(sc) {
        let mut x = [0.0; LANES];
        for l in 0..LANES {
            x[l] = wi - scale * c[l] - s[l];
        }
        clamp_block(&mut x);
        exp_block(&mut x);
        for l in 0..LANES {
            a[l] += x[l];
        }
    }
    let done = cost_row.len() / LANES * LANES;
    for j in done..cost_row.len() {
        acc[j] += exp_clamped(wi - scale * cost_row[j] - shift[j]);
    }
}

/// Stable `log Σ exp(xᵢ)` over an arbitrary slice.
pub(crate) fn lse(x: &[f64]) -> f64 {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let s: f64 = x.iter().map(|&v| exp_nonpos(v - m)).sum();
    m + s.ln()
}
