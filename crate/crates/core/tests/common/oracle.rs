//! Reference decoder loss, written independently of the library and generic
//! over the number type, plus a double-double type so that finite
//! differences are not swamped by f64 rounding of the loss.

use std::ops::{Add, Div, Mul, Neg, Sub};

use capforge_core::captioner::{DecoderParams, FeatureGrid};

pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn of(x: f64) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn hi(self) -> f64;

    fn tanh(self) -> Self {
        let neg = self.hi() < 0.0;
        let a = if neg { -self } else { self };
        let e = (a * Self::of(-2.0)).exp();
        let t = (Self::of(1.0) - e) / (Self::of(1.0) + e);
        if neg {
            -t
        } else {
            t
        }
    }

    fn sigmoid(self) -> Self {
        Self::of(1.0) / (Self::of(1.0) + (-self).exp())
    }
}

impl Real for f64 {
    fn of(x: f64) -> Self {
        x
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn hi(self) -> f64 {
        self
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
}

/// Unevaluated sum `hi + lo` with |lo| ≤ ulp(hi)/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    fn new(hi: f64, lo: f64) -> Self {
        let (hi, lo) = quick_two_sum(hi, lo);
        Dd { hi, lo }
    }

    fn scale2(self, k: i32) -> Self {
        let f = 2f64.powi(k);
        Dd {
            hi: self.hi * f,
            lo: self.lo * f,
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        Dd::new(s, e + f)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        Dd::new(p, e + (self.hi * b.lo + self.lo * b.hi))
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b * Dd::of(q1);
        let q2 = r.hi / b.hi;
        let r = r - b * Dd::of(q2);
        let q3 = r.hi / b.hi;
        Dd::new(q1, q2) + Dd::of(q3)
    }
}

const LN2: Dd = Dd {
    hi: std::f64::consts::LN_2,
    lo: 2.3190468138462996e-17,
};

impl Real for Dd {
    fn of(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    fn exp(self) -> Self {
        if self.hi < -745.0 {
            return Dd::of(0.0);
        }
        let k = (self.hi / LN2.hi).round();
        let r = (self - LN2 * Dd::of(k)).scale2(-10);
        let mut term = Dd::of(1.0);
        let mut sum = Dd::of(1.0);
        for n in 1..=22 {
            term = term * r / Dd::of(n as f64);
            sum = sum + term;
        }
        for _ in 0..10 {
            sum = sum * sum;
        }
        sum.scale2(k as i32)
    }

    fn ln(self) -> Self {
        let mut y = Dd::of(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - Dd::of(1.0);
        }
        y
    }

    fn hi(self) -> f64 {
        self.hi
    }
}

fn matvec<T: Real>(w: &[T], rows: usize, cols: usize, x: &[T]) -> Vec<T> {
    (0..rows)
        .map(|r| {
            let mut acc = T::of(0.0);
            for c in 0..cols {
                acc = acc + w[r * cols + c] * x[c];
            }
            acc
        })
        .collect()
}

/// Decoder weights converted to `T`, in the library's tensor order.
pub struct Weights<T> {
    pub tensors: Vec<Vec<T>>,
}

impl<T: Real> Weights<T> {
    pub fn from_params(p: &DecoderParams) -> Self {
        Weights {
            tensors: p
                .tensors()
                .iter()
                .map(|t| t.data.iter().map(|&x| T::of(x)).collect())
                .collect(),
        }
    }
}

/// Mean teacher-forced cross-entropy, straight from the model equations.
pub fn reference_loss<T: Real>(
    p: &DecoderParams,
    w: &Weights<T>,
    grid: &FeatureGrid,
    gold: &[usize],
) -> T {
    let d = p.dims;
    let (v, m, n, dd, k) = (d.vocab, d.embed, d.hidden, d.feature, d.attention);
    let l = grid.locations;
    let t = &w.tensors;
    let (emb, wx, wh, b, wa, wha, ws) = (&t[0], &t[1], &t[2], &t[3], &t[4], &t[5], &t[6]);
    let (ihw, ihb, icw, icb, ow, ob) = (&t[7], &t[8], &t[9], &t[10], &t[11], &t[12]);

    let rows: Vec<Vec<T>> = (0..l)
        .map(|i| grid.row(i).iter().map(|&x| T::of(x)).collect())
        .collect();
    let mut mean = vec![T::of(0.0); dd];
    for r in &rows {
        for j in 0..dd {
            mean[j] = mean[j] + r[j];
        }
    }
    let mean: Vec<T> = mean.into_iter().map(|x| x / T::of(l as f64)).collect();
    let mut h: Vec<T> = matvec(ihw, n, dd, &mean)
        .into_iter()
        .zip(ihb)
        .map(|(a, b)| (a + *b).tanh())
        .collect();
    let mut c: Vec<T> = matvec(icw, n, dd, &mean)
        .into_iter()
        .zip(icb)
        .map(|(a, b)| (a + *b).tanh())
        .collect();

    let mut total = T::of(0.0);
    for pair in gold.windows(2) {
        let (tok, target) = (pair[0], pair[1]);
        let hp = matvec(wha, k, n, &h);
        let scores: Vec<T> = rows
            .iter()
            .map(|a| {
                let pa = matvec(wa, k, dd, a);
                let mut e = T::of(0.0);
                for q in 0..k {
                    e = e + ws[q] * (pa[q] + hp[q]).tanh();
                }
                e
            })
            .collect();
        let mx = scores
            .iter()
            .map(|s| s.hi())
            .fold(f64::NEG_INFINITY, f64::max);
        let ex: Vec<T> = scores.iter().map(|&s| (s - T::of(mx)).exp()).collect();
        let mut z = T::of(0.0);
        for e in &ex {
            z = z + *e;
        }
        let mut ctx = vec![T::of(0.0); dd];
        for (e, a) in ex.iter().zip(&rows) {
            let alpha = *e / z;
            for j in 0..dd {
                ctx[j] = ctx[j] + alpha * a[j];
            }
        }
        let mut x: Vec<T> = emb[tok * m..(tok + 1) * m].to_vec();
        x.extend(ctx);
        let gx = matvec(wx, 4 * n, m + dd, &x);
        let gh = matvec(wh, 4 * n, n, &h);
        let pre: Vec<T> = (0..4 * n).map(|r| gx[r] + gh[r] + b[r]).collect();
        let mut h2 = Vec::with_capacity(n);
        let mut c2 = Vec::with_capacity(n);
        for j in 0..n {
            let i_g = pre[j].sigmoid();
            let f_g = pre[n + j].sigmoid();
            let o_g = pre[2 * n + j].sigmoid();
            let g_g = pre[3 * n + j].tanh();
            let cj = f_g * c[j] + i_g * g_g;
            c2.push(cj);
            h2.push(o_g * cj.tanh());
        }
        h = h2;
        c = c2;
        let logits: Vec<T> = matvec(ow, v, n, &h)
            .into_iter()
            .zip(ob)
            .map(|(a, b)| a + *b)
            .collect();
        let mx = logits
            .iter()
            .map(|s| s.hi())
            .fold(f64::NEG_INFINITY, f64::max);
        let mut z = T::of(0.0);
        for s in &logits {
            z = z + (*s - T::of(mx)).exp();
        }
        total = total + T::of(mx) + z.ln() - logits[target];
    }
    total / T::of((gold.len() - 1) as f64)
}

/// Central difference `(L(θ + h) − L(θ − h)) / 2h` for one component,
/// evaluated in double-double.
pub fn central_difference(
    p: &DecoderParams,
    grid: &FeatureGrid,
    gold: &[usize],
    tensor: usize,
    index: usize,
    h: f64,
) -> f64 {
    let mut w = Weights::<Dd>::from_params(p);
    let base = w.tensors[tensor][index];
    w.tensors[tensor][index] = base + Dd::of(h);
    let plus = reference_loss(p, &w, grid, gold);
    w.tensors[tensor][index] = base - Dd::of(h);
    let minus = reference_loss(p, &w, grid, gold);
    let d = (plus - minus) / Dd::of(2.0 * h);
    d.hi + d.lo
}

pub struct GradMismatch {
    pub tensor: &'static str,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl GradMismatch {
    pub fn relative_error(&self) -> f64 {
        let scale = self.analytic.abs().max(self.numeric.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.analytic - self.numeric).abs() / scale
        }
    }
}

/// Every component of the analytic gradient next to its central difference.
pub fn compare_all(
    p: &DecoderParams,
    grid: &FeatureGrid,
    gold: &[usize],
    h: f64,
) -> Vec<GradMismatch> {
    use capforge_core::captioner::{backward, forward_loss, TENSOR_NAMES};
    let (_, tape) = forward_loss(grid, gold, p).expect("forward");
    let grads = backward(&tape, p);
    let mut out = Vec::with_capacity(p.num_params());
    for (t, name) in TENSOR_NAMES.iter().enumerate() {
        for index in 0..p.tensors()[t].len() {
            out.push(GradMismatch {
                tensor: name,
                index,
                analytic: grads.tensors()[t].data[index],
                numeric: central_difference(p, grid, gold, t, index, h),
            });
        }
    }
    out
}
