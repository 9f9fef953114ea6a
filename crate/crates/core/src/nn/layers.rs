//! Forward/backward building blocks. Every layer keeps its parameters in a
//! shared [`ParamSet`] and returns a cache from `forward` that `backward`
//! consumes; gradients are accumulated into a [`Grads`] buffer.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::params::{Grads, ParamId, ParamSet};
use super::tensor::{axpy, dot, ensure_finite, matmul, matmul_at_acc, matmul_bt, Real, Tensor};
use super::NnError;

/// Inverted-dropout mask: entries are 0 or `1/(1-rate)`. `None` means identity.
pub fn dropout_mask<T: Real, R: Rng>(
    len: usize,
    rate: f64,
    rng: &mut R,
    training: bool,
) -> Result<Option<Vec<T>>, NnError> {
    if !(0.0..1.0).contains(&rate) {
        return Err(NnError::InvalidRate(rate));
    }
    if !training || rate == 0.0 {
        return Ok(None);
    }
    let keep = T::of(1.0 / (1.0 - rate));
    Ok(Some(
        (0..len)
            .map(|_| {
                if rng.random::<f64>() < rate {
                    T::zero()
                } else {
                    keep
                }
            })
            .collect(),
    ))
}

pub fn dropout<T: Real, R: Rng>(
    x: &Tensor<T>,
    rate: f64,
    rng: &mut R,
    training: bool,
) -> Result<Tensor<T>, NnError> {
    let mut out = x.clone();
    if let Some(mask) = dropout_mask::<T, R>(x.len(), rate, rng, training)? {
        apply_mask(out.data_mut(), &mask);
    }
    Ok(out)
}

fn apply_mask<T: Real>(x: &mut [T], mask: &[T]) {
    for (v, m) in x.iter_mut().zip(mask) {
        *v *= *m;
    }
}

#[inline]
pub fn relu<T: Real>(x: &mut [T]) {
    for v in x {
        if *v <= T::zero() {
            *v = T::zero();
        }
    }
}

/// Gradient convention: zero where the pre-activation is `<= 0`.
#[inline]
pub fn relu_backward<T: Real>(pre: &[T], dy: &mut [T]) {
    for (g, p) in dy.iter_mut().zip(pre) {
        if *p <= T::zero() {
            *g = T::zero();
        }
    }
}

/// Affine map with a `fan_in x fan_out` weight and a bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    pub fn new<T: Real>(
        ps: &mut ParamSet<T>,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let w = ps.add_xavier(format!("{name}.weight"), fan_in, fan_out, rng);
        let b = ps.add(format!("{name}.bias"), Tensor::zeros(&[fan_out]));
        Self {
            w,
            b,
            fan_in,
            fan_out,
        }
    }

    pub fn forward<T: Real>(&self, ps: &ParamSet<T>, x: &[T], n: usize) -> Result<Vec<T>, NnError> {
        if x.len() != n * self.fan_in {
            return Err(NnError::ShapeMismatch {
                op: "linear",
                expected: n * self.fan_in,
                got: x.len(),
            });
        }
        let mut y = vec![T::zero(); n * self.fan_out];
        matmul(x, n, self.fan_in, ps.value(self.w), self.fan_out, &mut y);
        let b = ps.value(self.b);
        for r in 0..n {
            for (v, bv) in y[r * self.fan_out..(r + 1) * self.fan_out]
                .iter_mut()
                .zip(b)
            {
                *v += *bv;
            }
        }
        Ok(y)
    }

    pub fn backward<T: Real>(
        &self,
        ps: &ParamSet<T>,
        x: &[T],
        n: usize,
        dy: &[T],
        grads: &mut Grads<T>,
        want_dx: bool,
    ) -> Option<Vec<T>> {
        matmul_at_acc(x, n, self.fan_in, dy, self.fan_out, grads.get_mut(self.w));
        let db = grads.get_mut(self.b);
        for r in 0..n {
            for (g, d) in db
                .iter_mut()
                .zip(&dy[r * self.fan_out..(r + 1) * self.fan_out])
            {
                *g += *d;
            }
        }
        want_dx.then(|| {
            let mut dx = vec![T::zero(); n * self.fan_in];
            matmul_bt(dy, n, self.fan_out, ps.value(self.w), self.fan_in, &mut dx);
            dx
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub dim: usize,
    pub eps: f64,
}

#[derive(Debug, Clone)]
pub struct LayerNormCache<T> {
    xhat: Vec<T>,
    inv_std: Vec<T>,
}

impl LayerNorm {
    pub fn new<T: Real>(ps: &mut ParamSet<T>, name: &str, dim: usize, eps: f64) -> Self {
        let gamma = ps.add(
            format!("{name}.gamma"),
            Tensor::from_vec(&[dim], vec![T::one(); dim]).expect("shape"),
        );
        let beta = ps.add(format!("{name}.beta"), Tensor::zeros(&[dim]));
        Self {
            gamma,
            beta,
            dim,
            eps,
        }
    }

    pub fn forward<T: Real>(
        &self,
        ps: &ParamSet<T>,
        x: &[T],
        n: usize,
    ) -> (Vec<T>, LayerNormCache<T>) {
        let d = self.dim;
        let (g, b) = (ps.value(self.gamma), ps.value(self.beta));
        let mut y = vec![T::zero(); n * d];
        let mut xhat = vec![T::zero(); n * d];
        let mut inv_std = Vec::with_capacity(n);
        let dn = T::of(d as f64);
        for r in 0..n {
            let row = &x[r * d..(r + 1) * d];
            let mean = row.iter().copied().sum::<T>() / dn;
            let var = row.iter().map(|v| (*v - mean) * (*v - mean)).sum::<T>() / dn;
            let inv = T::one() / (var + T::of(self.eps)).sqrt();
            inv_std.push(inv);
            for j in 0..d {
                let h = (row[j] - mean) * inv;
                xhat[r * d + j] = h;
                y[r * d + j] = g[j] * h + b[j];
            }
        }
        (y, LayerNormCache { xhat, inv_std })
    }

    pub fn backward<T: Real>(
        &self,
        ps: &ParamSet<T>,
        cache: &LayerNormCache<T>,
        dy: &[T],
        n: usize,
        grads: &mut Grads<T>,
    ) -> Vec<T> {
        let d = self.dim;
        let g = ps.value(self.gamma);
        {
            let dg = grads.get_mut(self.gamma);
            for r in 0..n {
                for j in 0..d {
                    dg[j] += dy[r * d + j] * cache.xhat[r * d + j];
                }
            }
        }
        {
            let db = grads.get_mut(self.beta);
            for r in 0..n {
                for j in 0..d {
                    db[j] += dy[r * d + j];
                }
            }
        }
        let dn = T::of(d as f64);
        let mut dx = vec![T::zero(); n * d];
        let mut dxhat = vec![T::zero(); d];
        for r in 0..n {
            let xh = &cache.xhat[r * d..(r + 1) * d];
            for j in 0..d {
                dxhat[j] = dy[r * d + j] * g[j];
            }
            let s1: T = dxhat.iter().copied().sum();
            let s2 = dot(&dxhat, xh);
            let k = cache.inv_std[r] / dn;
            for j in 0..d {
                dx[r * d + j] = k * (dn * dxhat[j] - s1 - xh[j] * s2);
            }
        }
        dx
    }
}

/// Multi-head scaled dot-product self-attention.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfAttention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub dim: usize,
    pub heads: usize,
}

#[derive(Debug, Clone)]
pub struct AttentionCache<T> {
    len: usize,
    q: Vec<T>,
    k: Vec<T>,
    v: Vec<T>,
    /// `heads x len x len` softmax weights.
    probs: Vec<T>,
    mask: Option<Vec<T>>,
    ctx: Vec<T>,
}

impl<T: Real> AttentionCache<T> {
    /// Softmax weights of one head as a `len x len` row-major block.
    pub fn weights(&self, head: usize) -> &[T] {
        let l2 = self.len * self.len;
        &self.probs[head * l2..(head + 1) * l2]
    }
}

impl SelfAttention {
    pub fn new<T: Real>(
        ps: &mut ParamSet<T>,
        name: &str,
        dim: usize,
        heads: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, NnError> {
        if heads == 0 || dim % heads != 0 {
            return Err(NnError::ShapeMismatch {
                op: "attention heads",
                expected: dim,
                got: heads,
            });
        }
        Ok(Self {
            q: Linear::new(ps, &format!("{name}.q"), dim, dim, rng),
            k: Linear::new(ps, &format!("{name}.k"), dim, dim, rng),
            v: Linear::new(ps, &format!("{name}.v"), dim, dim, rng),
            o: Linear::new(ps, &format!("{name}.o"), dim, dim, rng),
            dim,
            heads,
        })
    }

    pub fn forward<T: Real>(
        &self,
        ps: &ParamSet<T>,
        x: &[T],
        len: usize,
        dropout: f64,
        rng: &mut ChaCha8Rng,
        training: bool,
    ) -> Result<(Vec<T>, AttentionCache<T>), NnError> {
        let (d, h) = (self.dim, self.heads);
        let dk = d / h;
        let q = self.q.forward(ps, x, len)?;
        let k = self.k.forward(ps, x, len)?;
        let v = self.v.forward(ps, x, len)?;
        let scale = T::of(1.0 / (dk as f64).sqrt());
        let l2 = len * len;
        let mut probs = vec![T::zero(); h * l2];
        for hh in 0..h {
            let off = hh * dk;
            for i in 0..len {
                let qi = &q[i * d + off..i * d + off + dk];
                let row = &mut probs[hh * l2 + i * len..hh * l2 + (i + 1) * len];
                for j in 0..len {
                    row[j] = dot(qi, &k[j * d + off..j * d + off + dk]) * scale;
                }
                softmax_in_place(row);
            }
        }
        let mask = dropout_mask::<T, _>(h * l2, dropout, rng, training)?;
        let mut used = probs.clone();
        if let Some(m) = &mask {
            apply_mask(&mut used, m);
        }
        let mut ctx = vec![T::zero(); len * d];
        for hh in 0..h {
            let off = hh * dk;
            for i in 0..len {
                for j in 0..len {
                    let a = used[hh * l2 + i * len + j];
                    if a != T::zero() {
                        let (src, dst) = (
                            &v[j * d + off..j * d + off + dk],
                            &mut ctx[i * d + off..i * d + off + dk],
                        );
                        axpy(a, src, dst);
                    }
                }
            }
        }
        let out = self.o.forward(ps, &ctx, len)?;
        ensure_finite(&out, "attention")?;
        Ok((
            out,
            AttentionCache {
                len,
                q,
                k,
                v,
                probs,
                mask,
                ctx,
            },
        ))
    }

    pub fn backward<T: Real>(
        &self,
        ps: &ParamSet<T>,
        x: &[T],
        cache: &AttentionCache<T>,
        dout: &[T],
        grads: &mut Grads<T>,
    ) -> Result<Vec<T>, NnError> {
        let (d, h, len) = (self.dim, self.heads, cache.len);
        let dk = d / h;
        let l2 = len * len;
        let scale = T::of(1.0 / (dk as f64).sqrt());
        let dctx = self
            .o
            .backward(ps, &cache.ctx, len, dout, grads, true)
            .expect("dx requested");
        let mut dq = vec![T::zero(); len * d];
        let mut dkv = vec![T::zero(); len * d];
        let mut dv = vec![T::zero(); len * d];
        let mut da = vec![T::zero(); len];
        for hh in 0..h {
            let off = hh * dk;
            for i in 0..len {
                let dci = &dctx[i * d + off..i * d + off + dk];
                let p = &cache.probs[hh * l2 + i * len..hh * l2 + (i + 1) * len];
                // gradient w.r.t. the (dropped) weights, then through the mask
                for j in 0..len {
                    let mut g = dot(dci, &cache.v[j * d + off..j * d + off + dk]);
                    let m = cache
                        .mask
                        .as_ref()
                        .map_or(T::one(), |m| m[hh * l2 + i * len + j]);
                    let used = p[j] * m;
                    if used != T::zero() {
                        axpy(used, dci, &mut dv[j * d + off..j * d + off + dk]);
                    }
                    g *= m;
                    da[j] = g;
                }
                // softmax backward
                let s = dot(&da, p);
                for j in 0..len {
                    let ds = p[j] * (da[j] - s) * scale;
                    if ds != T::zero() {
                        axpy(
                            ds,
                            &cache.k[j * d + off..j * d + off + dk],
                            &mut dq[i * d + off..i * d + off + dk],
                        );
                        axpy(
                            ds,
                            &cache.q[i * d + off..i * d + off + dk],
                            &mut dkv[j * d + off..j * d + off + dk],
                        );
                    }
                }
            }
        }
        let mut dx = self.q.backward(ps, x, len, &dq, grads, true).expect("dx");
        let dxk = self.k.backward(ps, x, len, &dkv, grads, true).expect("dx");
        let dxv = self.v.backward(ps, x, len, &dv, grads, true).expect("dx");
        for ((a, b), c) in dx.iter_mut().zip(&dxk).zip(&dxv) {
            *a += *b + *c;
        }
        ensure_finite(&dx, "attention backward")?;
        Ok(dx)
    }
}

pub fn softmax_in_place<T: Real>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Shape and dropout placement of a post-norm encoder layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderConfig {
    pub dim: usize,
    pub heads: usize,
    pub ff_hidden: usize,
    pub attn_dropout: bool,
    pub ff_dropout: bool,
    pub ln_eps: f64,
}

impl EncoderConfig {
    pub fn new(dim: usize, heads: usize, ff_hidden: usize) -> Self {
        Self {
            dim,
            heads,
            ff_hidden,
            attn_dropout: true,
            ff_dropout: true,
            ln_eps: 1e-5,
        }
    }
}

/// Self-attention, residual, layer norm, ReLU feed-forward, residual,
/// layer norm. No positional signal, so the layer is permutation
/// equivariant over its input rows.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayer {
    pub cfg: EncoderConfig,
    pub attn: SelfAttention,
    pub ln1: LayerNorm,
    pub ff1: Linear,
    pub ff2: Linear,
    pub ln2: LayerNorm,
}

#[derive(Debug, Clone)]
pub struct EncoderCache<T> {
    len: usize,
    x: Vec<T>,
    pub attn: AttentionCache<T>,
    ln1: LayerNormCache<T>,
    z: Vec<T>,
    h_pre: Vec<T>,
    h: Vec<T>,
    ff_mask: Option<Vec<T>>,
    ln2: LayerNormCache<T>,
}

impl<T: Real> EncoderCache<T> {
    /// Which feed-forward ReLU units were active, in row-major order.
    pub fn relu_pattern(&self) -> impl Iterator<Item = bool> + '_ {
        self.h_pre.iter().map(|v| *v > T::zero())
    }
}

impl EncoderLayer {
    pub fn new<T: Real>(
        ps: &mut ParamSet<T>,
        name: &str,
        cfg: EncoderConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, NnError> {
        Ok(Self {
            attn: SelfAttention::new(ps, &format!("{name}.attn"), cfg.dim, cfg.heads, rng)?,
            ln1: LayerNorm::new(ps, &format!("{name}.ln1"), cfg.dim, cfg.ln_eps),
            ff1: Linear::new(ps, &format!("{name}.ff1"), cfg.dim, cfg.ff_hidden, rng),
            ff2: Linear::new(ps, &format!("{name}.ff2"), cfg.ff_hidden, cfg.dim, rng),
            ln2: LayerNorm::new(ps, &format!("{name}.ln2"), cfg.dim, cfg.ln_eps),
            cfg,
        })
    }

    /// `x` is a `len x dim` row-major sequence.
    pub fn forward<T: Real>(
        &self,
        ps: &ParamSet<T>,
        x: &[T],
        len: usize,
        dropout: f64,
        rng: &mut ChaCha8Rng,
        training: bool,
    ) -> Result<(Vec<T>, EncoderCache<T>), NnError> {
        let d = self.cfg.dim;
        if len == 0 {
            return Err(NnError::EmptySequence);
        }
        if x.len() != len * d {
            return Err(NnError::ShapeMismatch {
                op: "encoder input",
                expected: len * d,
                got: x.len(),
            });
        }
        let attn_rate = if self.cfg.attn_dropout { dropout } else { 0.0 };
        let (a, attn) = self.attn.forward(ps, x, len, attn_rate, rng, training)?;
        let r1: Vec<T> = x.iter().zip(&a).map(|(p, q)| *p + *q).collect();
        let (z, ln1) = self.ln1.forward(ps, &r1, len);
        let h_pre = self.ff1.forward(ps, &z, len)?;
        let mut h = h_pre.clone();
        relu(&mut h);
        let mut f = self.ff2.forward(ps, &h, len)?;
        let ff_rate = if self.cfg.ff_dropout { dropout } else { 0.0 };
        let ff_mask = dropout_mask::<T, _>(f.len(), ff_rate, rng, training)?;
        if let Some(m) = &ff_mask {
            apply_mask(&mut f, m);
        }
        let r2: Vec<T> = z.iter().zip(&f).map(|(p, q)| *p + *q).collect();
        let (out, ln2) = self.ln2.forward(ps, &r2, len);
        ensure_finite(&out, "encoder layer")?;
        Ok((
            out,
            EncoderCache {
                len,
                x: x.to_vec(),
                attn,
                ln1,
                z,
                h_pre,
                h,
                ff_mask,
                ln2,
            },
        ))
    }

    pub fn backward<T: Real>(
        &self,
        ps: &ParamSet<T>,
        cache: &EncoderCache<T>,
        dout: &[T],
        grads: &mut Grads<T>,
    ) -> Result<Vec<T>, NnError> {
        let len = cache.len;
        let dr2 = self.ln2.backward(ps, &cache.ln2, dout, len, grads);
        let mut df = dr2.clone();
        if let Some(m) = &cache.ff_mask {
            apply_mask(&mut df, m);
        }
        let mut dh = self
            .ff2
            .backward(ps, &cache.h, len, &df, grads, true)
            .expect("dx");
        relu_backward(&cache.h_pre, &mut dh);
        let dz_ff = self
            .ff1
            .backward(ps, &cache.z, len, &dh, grads, true)
            .expect("dx");
        let dz: Vec<T> = dr2.iter().zip(&dz_ff).map(|(a, b)| *a + *b).collect();
        let dr1 = self.ln1.backward(ps, &cache.ln1, &dz, len, grads);
        let dx_attn = self.attn.backward(ps, &cache.x, &cache.attn, &dr1, grads)?;
        let dx: Vec<T> = dr1.iter().zip(&dx_attn).map(|(a, b)| *a + *b).collect();
        ensure_finite(&dx, "encoder layer backward")?;
        Ok(dx)
    }
}

/// Input dropout, one ReLU hidden layer, linear readout.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub l1: Linear,
    pub l2: Linear,
}

#[derive(Debug, Clone)]
pub struct MlpCache<T> {
    n: usize,
    x: Vec<T>,
    mask: Option<Vec<T>>,
    h_pre: Vec<T>,
    h: Vec<T>,
}

impl<T: Real> MlpCache<T> {
    /// Which hidden ReLU units were active, in row-major order.
    pub fn relu_pattern(&self) -> impl Iterator<Item = bool> + '_ {
        self.h_pre.iter().map(|v| *v > T::zero())
    }
}

impl Mlp {
    pub fn new<T: Real>(
        ps: &mut ParamSet<T>,
        name: &str,
        input: usize,
        hidden: usize,
        output: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        Self {
            l1: Linear::new(ps, &format!("{name}.l1"), input, hidden, rng),
            l2: Linear::new(ps, &format!("{name}.l2"), hidden, output, rng),
        }
    }

    /// `x` is `n x input`; returns `n x output`.
    pub fn forward<T: Real>(
        &self,
        ps: &ParamSet<T>,
        x: &[T],
        n: usize,
        dropout: f64,
        rng: &mut ChaCha8Rng,
        training: bool,
    ) -> Result<(Vec<T>, MlpCache<T>), NnError> {
        ensure_finite(x, "mlp input")?;
        let mask = dropout_mask::<T, _>(x.len(), dropout, rng, training)?;
        let mut xd = x.to_vec();
        if let Some(m) = &mask {
            apply_mask(&mut xd, m);
        }
        let h_pre = self.l1.forward(ps, &xd, n)?;
        let mut h = h_pre.clone();
        relu(&mut h);
        let y = self.l2.forward(ps, &h, n)?;
        ensure_finite(&y, "mlp")?;
        Ok((
            y,
            MlpCache {
                n,
                x: xd,
                mask,
                h_pre,
                h,
            },
        ))
    }

    pub fn backward<T: Real>(
        &self,
        ps: &ParamSet<T>,
        cache: &MlpCache<T>,
        dy: &[T],
        grads: &mut Grads<T>,
        want_dx: bool,
    ) -> Result<Option<Vec<T>>, NnError> {
        let n = cache.n;
        let mut dh = self
            .l2
            .backward(ps, &cache.h, n, dy, grads, true)
            .expect("dx");
        relu_backward(&cache.h_pre, &mut dh);
        let dx = self.l1.backward(ps, &cache.x, n, &dh, grads, want_dx);
        Ok(match dx {
            Some(mut dx) => {
                if let Some(m) = &cache.mask {
                    apply_mask(&mut dx, m);
                }
                ensure_finite(&dx, "mlp backward")?;
                Some(dx)
            }
            None => None,
        })
    }
}
