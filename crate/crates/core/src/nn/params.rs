use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tensor::{Real, Tensor};
use super::NnError;

/// Index of a parameter inside a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
    pub(crate) m: Tensor<T>,
    pub(crate) v: Tensor<T>,
}

/// Named trainable tensors with gradient slots, Adam moments and the
/// dropout stream state.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<T> {
    params: Vec<Param<T>>,
    step: u64,
    rng_seed: u64,
    rng_counter: u64,
}

/// Gradient buffer with one slot per parameter, filled by backward passes.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads<T> {
    pub(crate) slots: Vec<Vec<T>>,
}

impl<T: Real> Grads<T> {
    pub fn get(&self, id: ParamId) -> &[T] {
        &self.slots[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [T] {
        &mut self.slots[id.0]
    }

    pub fn add(&mut self, other: &Grads<T>) {
        for (a, b) in self.slots.iter_mut().zip(&other.slots) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }

    pub fn scale(&mut self, k: T) {
        for s in &mut self.slots {
            s.iter_mut().for_each(|v| *v *= k);
        }
    }

    pub fn ensure_finite(&self, op: &'static str) -> Result<(), NnError> {
        for s in &self.slots {
            super::tensor::ensure_finite(s, op)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl<T: Real> ParamSet<T> {
    pub fn new(rng_seed: u64) -> Self {
        Self {
            params: Vec::new(),
            step: 0,
            rng_seed,
            rng_counter: 0,
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>) -> ParamId {
        let shape = value.shape().to_vec();
        self.params.push(Param {
            name: name.into(),
            grad: Tensor::zeros(&shape),
            m: Tensor::zeros(&shape),
            v: Tensor::zeros(&shape),
            value,
        });
        ParamId(self.params.len() - 1)
    }

    /// Xavier-uniform `fan_in x fan_out` weight.
    pub fn add_xavier(
        &mut self,
        name: impl Into<String>,
        fan_in: usize,
        fan_out: usize,
        rng: &mut ChaCha8Rng,
    ) -> ParamId {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| T::of(rng.random_range(-bound..bound)))
            .collect();
        let t = Tensor::from_vec(&[fan_in, fan_out], data).expect("shape matches");
        self.add(name, t)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn params(&self) -> &[Param<T>] {
        &self.params
    }

    pub fn value(&self, id: ParamId) -> &[T] {
        self.params[id.0].value.data()
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut [T] {
        self.params[id.0].value.data_mut()
    }

    pub fn grad(&self, id: ParamId) -> &[T] {
        self.params[id.0].grad.data()
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn zero_grads_like(&self) -> Grads<T> {
        Grads {
            slots: self
                .params
                .iter()
                .map(|p| vec![T::zero(); p.value.len()])
                .collect(),
        }
    }

    /// Adds a backward buffer into the gradient slots.
    pub fn accumulate(&mut self, grads: &Grads<T>) {
        for (p, g) in self.params.iter_mut().zip(&grads.slots) {
            for (a, b) in p.grad.data_mut().iter_mut().zip(g) {
                *a += *b;
            }
        }
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.data_mut().iter_mut().for_each(|v| *v = T::zero());
        }
    }

    /// Fresh dropout RNG. Each call advances the stream counter so masks
    /// never repeat within a run, independent of thread scheduling.
    pub fn next_rng(&mut self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        rng.set_stream(self.rng_counter);
        self.rng_counter += 1;
        rng
    }

    /// Reserves `n` consecutive streams and returns the first.
    pub fn reserve_rng_streams(&mut self, n: u64) -> (u64, u64) {
        let first = self.rng_counter;
        self.rng_counter += n;
        (self.rng_seed, first)
    }

    /// Bias-corrected Adam update; zeroes the gradients afterwards.
    pub fn adam_step(&mut self, lr: f64, cfg: AdamConfig) -> Result<(), NnError> {
        if !(lr > 0.0) || !lr.is_finite() {
            return Err(NnError::InvalidLearningRate(lr));
        }
        self.step += 1;
        let t = self.step as f64;
        let (b1, b2) = (T::of(cfg.beta1), T::of(cfg.beta2));
        let c1 = T::of(1.0 - cfg.beta1);
        let c2 = T::of(1.0 - cfg.beta2);
        let bc1 = T::of(1.0 / (1.0 - cfg.beta1.powf(t)));
        let bc2 = T::of(1.0 / (1.0 - cfg.beta2.powf(t)));
        let lr = T::of(lr);
        let eps = T::of(cfg.eps);
        for p in &mut self.params {
            let n = p.value.len();
            let (val, grad) = (p.value.data_mut(), p.grad.data_mut());
            let (m, v) = (p.m.data_mut(), p.v.data_mut());
            for i in 0..n {
                let g = grad[i];
                m[i] = b1 * m[i] + c1 * g;
                v[i] = b2 * v[i] + c2 * g * g;
                let mh = m[i] * bc1;
                let vh = v[i] * bc2;
                val[i] -= lr * mh / (vh.sqrt() + eps);
                grad[i] = T::zero();
            }
            super::tensor::ensure_finite(val, "adam_step")?;
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> ParamSet<U> {
        ParamSet {
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    value: p.value.cast(),
                    grad: p.grad.cast(),
                    m: p.m.cast(),
                    v: p.v.cast(),
                })
                .collect(),
            step: self.step,
            rng_seed: self.rng_seed,
            rng_counter: self.rng_counter,
        }
    }
}

const MAGIC: &[u8; 4] = b"SDQP";
const VERSION: u16 = 1;

impl ParamSet<f32> {
    /// Versioned little-endian checkpoint: names, shapes, values, Adam
    /// moments, step counter and dropout stream state.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), NnError> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&self.step.to_le_bytes())?;
        w.write_all(&self.rng_seed.to_le_bytes())?;
        w.write_all(&self.rng_counter.to_le_bytes())?;
        w.write_all(&(self.params.len() as u32).to_le_bytes())?;
        for p in &self.params {
            let name = p.name.as_bytes();
            w.write_all(&(name.len() as u16).to_le_bytes())?;
            w.write_all(name)?;
            w.write_all(&[p.value.shape().len() as u8])?;
            for d in p.value.shape() {
                w.write_all(&(*d as u32).to_le_bytes())?;
            }
            for t in [&p.value, &p.m, &p.v] {
                let mut buf = Vec::with_capacity(t.len() * 4);
                for v in t.data() {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
                w.write_all(&buf)?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, NnError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(NnError::Checkpoint("bad magic".into()));
        }
        let version = u16::from_le_bytes(read_n(r)?);
        if version != VERSION {
            return Err(NnError::Checkpoint(format!(
                "unsupported version {version}"
            )));
        }
        let step = u64::from_le_bytes(read_n(r)?);
        let rng_seed = u64::from_le_bytes(read_n(r)?);
        let rng_counter = u64::from_le_bytes(read_n(r)?);
        let count = u32::from_le_bytes(read_n(r)?) as usize;
        let mut params = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = u16::from_le_bytes(read_n(r)?) as usize;
            let mut name = vec![0u8; name_len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name)
                .map_err(|_| NnError::Checkpoint("parameter name is not UTF-8".into()))?;
            let [ndim] = read_n::<1, _>(r)?;
            let mut shape = Vec::with_capacity(ndim as usize);
            for _ in 0..ndim {
                shape.push(u32::from_le_bytes(read_n(r)?) as usize);
            }
            let n: usize = shape.iter().product();
            let mut read_tensor = || -> Result<Tensor<f32>, NnError> {
                let mut buf = vec![0u8; n * 4];
                r.read_exact(&mut buf)?;
                let data = buf
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect();
                Tensor::from_vec(&shape, data)
            };
            let value = read_tensor()?;
            let m = read_tensor()?;
            let v = read_tensor()?;
            params.push(Param {
                name,
                grad: Tensor::zeros(&shape),
                value,
                m,
                v,
            });
        }
        Ok(Self {
            params,
            step,
            rng_seed,
            rng_counter,
        })
    }
}

fn read_n<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N], NnError> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}
