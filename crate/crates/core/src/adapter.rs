//! Adapter tuning on linear feature transforms.
//!
//! An [`AdapterBlock`] pairs a frozen affine transform with a structurally
//! identical trainable one whose output is added residually. Only the adapter
//! receives gradient; the base is immutable after construction.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// A dense feature vector with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param("feature", format!("entry {i} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// `y = W x + b` with a square row-major `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    dim: usize,
    weight: Vec<f64>,
    bias: Vec<f64>,
}

impl Linear {
    pub fn new(dim: usize, weight: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "must be at least 1"));
        }
        if weight.len() != dim * dim {
            return Err(Error::LengthMismatch {
                expected: dim * dim,
                actual: weight.len(),
            });
        }
        if bias.len() != dim {
            return Err(Error::LengthMismatch {
                expected: dim,
                actual: bias.len(),
            });
        }
        if weight.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::param("linear", "parameters must be finite"));
        }
        Ok(Self { dim, weight, bias })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            weight: vec![0.0; dim * dim],
            bias: vec![0.0; dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut l = Self::zeros(dim);
        for i in 0..dim {
            l.weight[i * dim + i] = 1.0;
        }
        l
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.weight
            .chunks(self.dim)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }

    fn is_zero(&self) -> bool {
        self.weight.iter().chain(&self.bias).all(|&v| v == 0.0)
    }
}

/// Gradients of a scalar objective with respect to one linear layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGrad {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LinearGrad {
    fn zeros(dim: usize) -> Self {
        Self {
            weight: vec![0.0; dim * dim],
            bias: vec![0.0; dim],
        }
    }

    fn accumulate(&mut self, other: &LinearGrad) {
        for (a, b) in self.weight.iter_mut().zip(&other.weight) {
            *a += b;
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a += b;
        }
    }
}

/// Parameter gradients for a block. `base` is always all zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct AdapterGrads {
    pub base: LinearGrad,
    pub adapter: LinearGrad,
}

/// Frozen base transform plus residual adapter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdapterBlock {
    base: Linear,
    adapter: Linear,
    adapter_trainable: bool,
}

impl AdapterBlock {
    /// Wraps `base` with a zero-initialised adapter.
    pub fn new(base: Linear) -> Self {
        let dim = base.dim();
        Self {
            base,
            adapter: Linear::zeros(dim),
            adapter_trainable: true,
        }
    }

    pub fn with_adapter(base: Linear, adapter: Linear) -> Result<Self> {
        if base.dim() != adapter.dim() {
            return Err(Error::param(
                "adapter",
                format!(
                    "dimension {} does not match base {}",
                    adapter.dim(),
                    base.dim()
                ),
            ));
        }
        Ok(Self {
            base,
            adapter,
            adapter_trainable: true,
        })
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn base(&self) -> &Linear {
        &self.base
    }

    pub fn adapter(&self) -> &Linear {
        &self.adapter
    }

    /// Freeze flags for `(base, adapter)`; the base is always frozen.
    pub fn frozen(&self) -> (bool, bool) {
        (true, !self.adapter_trainable)
    }

    pub fn set_adapter_trainable(&mut self, trainable: bool) {
        self.adapter_trainable = trainable;
    }

    /// Resets the adapter to zero, recovering the base transform exactly.
    pub fn zero_adapter(&mut self) {
        self.adapter = Linear::zeros(self.dim());
    }

    fn check(&self, f: &FeatureVector) -> Result<()> {
        if f.dim() != self.dim() {
            return Err(Error::LengthMismatch {
                expected: self.dim(),
                actual: f.dim(),
            });
        }
        Ok(())
    }

    /// `base(f) + adapter(f)`; exactly `base(f)` while the adapter is zero.
    pub fn forward(&self, f: &FeatureVector) -> Result<FeatureVector> {
        self.check(f)?;
        let mut out = self.base.apply(f.values());
        if !self.adapter.is_zero() {
            for (o, a) in out.iter_mut().zip(self.adapter.apply(f.values())) {
                *o += a;
            }
        }
        Ok(FeatureVector(out))
    }

    /// Gradients given `dL/d output`. Base gradients are zero by construction,
    /// as are adapter gradients when the adapter is frozen.
    pub fn backward(&self, f: &FeatureVector, upstream: &FeatureVector) -> Result<AdapterGrads> {
        self.check(f)?;
        self.check(upstream)?;
        let dim = self.dim();
        let mut adapter = LinearGrad::zeros(dim);
        if self.adapter_trainable {
            for (r, &u) in upstream.values().iter().enumerate() {
                for (c, &x) in f.values().iter().enumerate() {
                    adapter.weight[r * dim + c] = u * x;
                }
                adapter.bias[r] = u;
            }
        }
        Ok(AdapterGrads {
            base: LinearGrad::zeros(dim),
            adapter,
        })
    }

    fn step(&mut self, grads: &AdapterGrads, lr: f64) {
        for (p, g) in self.adapter.weight.iter_mut().zip(&grads.adapter.weight) {
            *p -= lr * g;
        }
        for (p, g) in self.adapter.bias.iter_mut().zip(&grads.adapter.bias) {
            *p -= lr * g;
        }
    }

    /// Plain-text serialisation: a header line, then `base.weight`,
    /// `base.bias`, `adapter.weight`, `adapter.bias` sections of row-major
    /// shortest round-trip decimals.
    pub fn to_text(&self) -> String {
        let mut out = format!("adapter-block {}\n", self.dim());
        for (name, layer) in [("base", &self.base), ("adapter", &self.adapter)] {
            let _ = writeln!(out, "{name}.weight");
            for row in layer.weight.chunks(layer.dim) {
                let _ = writeln!(out, "{}", join(row));
            }
            let _ = writeln!(out, "{name}.bias");
            let _ = writeln!(out, "{}", join(&layer.bias));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let err = |line: usize, message: String| Error::Config {
            line: line + 1,
            message,
        };
        let (ln, header) = lines
            .next()
            .ok_or_else(|| err(0, "empty adapter file".into()))?;
        let dim: usize = header
            .strip_prefix("adapter-block ")
            .and_then(|d| d.trim().parse().ok())
            .ok_or_else(|| err(ln, format!("bad header {header:?}")))?;
        let mut section = |name: &str, rows: usize| -> Result<Vec<f64>> {
            let (ln, title) = lines
                .next()
                .ok_or_else(|| err(0, format!("missing section {name}")))?;
            if title.trim() != name {
                return Err(err(ln, format!("expected section {name}, found {title:?}")));
            }
            let mut values = Vec::with_capacity(rows * dim);
            for _ in 0..rows {
                let (ln, line) = lines
                    .next()
                    .ok_or_else(|| err(0, format!("section {name} is truncated")))?;
                let row = line
                    .split_ascii_whitespace()
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|_| err(ln, format!("bad number {t:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if row.len() != dim {
                    return Err(err(
                        ln,
                        format!("expected {dim} values, found {}", row.len()),
                    ));
                }
                values.extend(row);
            }
            Ok(values)
        };
        let bw = section("base.weight", dim)?;
        let bb = section("base.bias", 1)?;
        let aw = section("adapter.weight", dim)?;
        let ab = section("adapter.bias", 1)?;
        Self::with_adapter(Linear::new(dim, bw, bb)?, Linear::new(dim, aw, ab)?)
    }
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Mean squared deviation `sum |forward(f) - target|^2 / (pairs * D)` and its gradient.
pub fn mse_objective(
    block: &AdapterBlock,
    data: &[(FeatureVector, FeatureVector)],
) -> Result<(f64, AdapterGrads)> {
    let dim = block.dim();
    let scale = 1.0 / (data.len() as f64 * dim as f64);
    let mut loss = 0.0;
    let mut grads = AdapterGrads {
        base: LinearGrad::zeros(dim),
        adapter: LinearGrad::zeros(dim),
    };
    for (f, target) in data {
        block.check(target)?;
        let out = block.forward(f)?;
        let resid: Vec<f64> = out
            .values()
            .iter()
            .zip(target.values())
            .map(|(o, t)| o - t)
            .collect();
        loss += scale * resid.iter().map(|r| r * r).sum::<f64>();
        let upstream = FeatureVector(resid.iter().map(|r| 2.0 * r * scale).collect());
        let g = block.backward(f, &upstream)?;
        grads.adapter.accumulate(&g.adapter);
    }
    Ok((loss, grads))
}

/// Gradient descent on [`mse_objective`], updating only the adapter.
///
/// Returns the trained block and the loss before each step plus the final loss.
pub fn train_adapter(
    block: &AdapterBlock,
    data: &[(FeatureVector, FeatureVector)],
    steps: usize,
    lr: f64,
) -> Result<(AdapterBlock, Vec<f64>)> {
    if steps == 0 {
        return Err(Error::param("steps", "must be at least 1"));
    }
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::param("lr", format!("{lr} must be > 0")));
    }
    if data.is_empty() {
        return Err(Error::param("data", "training set is empty"));
    }
    let mut block = block.clone();
    let mut trace = Vec::with_capacity(steps + 1);
    for step in 0..=steps {
        let (loss, grads) = mse_objective(&block, data)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                stage: "adapter",
                epoch: 0,
                step,
            });
        }
        trace.push(loss);
        if step < steps {
            block.step(&grads, lr);
        }
    }
    Ok((block, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn zero_adapter_is_base() {
        let base = Linear::new(2, vec![0.3, -1.2, 2.5, 0.7], vec![0.1, -0.4]).unwrap();
        let block = AdapterBlock::new(base.clone());
        let f = fv(&[0.9, -0.35]);
        assert_eq!(
            block.forward(&f).unwrap().values(),
            base.apply(f.values()).as_slice()
        );
    }

    #[test]
    fn identity_plus_identity_doubles() {
        let block = AdapterBlock::with_adapter(Linear::identity(3), Linear::identity(3)).unwrap();
        assert_eq!(
            block.forward(&fv(&[1.0, -2.0, 0.5])).unwrap().values(),
            &[2.0, -4.0, 1.0]
        );
    }

    #[test]
    fn hand_multiplied_3x3() {
        let base = Linear::new(
            3,
            vec![1., 2., 3., 4., 5., 6., 7., 8., 9.],
            vec![0.5, 0., -1.],
        )
        .unwrap();
        let adapter = Linear::new(
            3,
            vec![-1., 0., 2., 0.5, 1., 1., 3., -2., 0.],
            vec![0., 1., 0.],
        )
        .unwrap();
        let block = AdapterBlock::with_adapter(base, adapter).unwrap();
        // first columns: (1, 4, 7) + (-1, 0.5, 3) plus biases (0.5, 1, -1)
        assert_eq!(
            block.forward(&fv(&[1., 0., 0.])).unwrap().values(),
            &[0.5, 5.5, 9.0]
        );
    }

    #[test]
    fn backward_freezes_base() {
        let block = AdapterBlock::new(Linear::identity(2));
        let g = block.backward(&fv(&[1.0, 2.0]), &fv(&[0.5, -1.0])).unwrap();
        assert!(g.base.weight.iter().chain(&g.base.bias).all(|&v| v == 0.0));
        assert_eq!(g.adapter.weight, vec![0.5, 1.0, -1.0, -2.0]);
        assert_eq!(g.adapter.bias, vec![0.5, -1.0]);
        let z = block
            .backward(&fv(&[1.0, 2.0]), &FeatureVector::zeros(2))
            .unwrap();
        assert!(z
            .adapter
            .weight
            .iter()
            .chain(&z.adapter.bias)
            .all(|&v| v == 0.0));
    }

    #[test]
    fn frozen_adapter_gets_no_gradient() {
        let mut block = AdapterBlock::new(Linear::identity(2));
        block.set_adapter_trainable(false);
        assert_eq!(block.frozen(), (true, true));
        let g = block.backward(&fv(&[1.0, 2.0]), &fv(&[1.0, 1.0])).unwrap();
        assert!(g.adapter.weight.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_errors() {
        let block = AdapterBlock::new(Linear::identity(2));
        assert!(block.forward(&fv(&[1.0])).is_err());
        assert!(AdapterBlock::with_adapter(Linear::identity(2), Linear::identity(3)).is_err());
        assert!(FeatureVector::new(vec![f64::NAN]).is_err());
        assert!(train_adapter(&block, &[], 1, 0.1).is_err());
    }

    #[test]
    fn already_optimal_stays_at_zero() {
        let base = Linear::new(2, vec![1.0, 0.5, -0.5, 2.0], vec![0.0, 1.0]).unwrap();
        let block = AdapterBlock::new(base.clone());
        let data: Vec<_> = [[1.0, 0.0], [0.3, -0.7], [2.0, 1.0]]
            .iter()
            .map(|x| (fv(x), fv(&base.apply(x))))
            .collect();
        let (_, trace) = train_adapter(&block, &data, 50, 0.1).unwrap();
        assert!(trace.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn text_roundtrip() {
        let base = Linear::new(2, vec![0.1, 1.0 / 3.0, -2.5, 1e-17], vec![0.0, -0.25]).unwrap();
        let adapter = Linear::new(2, vec![1.0, 2.0, 3.0, 4.0], vec![5.0, 6.0]).unwrap();
        let block = AdapterBlock::with_adapter(base, adapter).unwrap();
        assert_eq!(AdapterBlock::from_text(&block.to_text()).unwrap(), block);
        assert!(AdapterBlock::from_text("adapter-block 2\nbase.weight\n1 2\n").is_err());
    }
}
