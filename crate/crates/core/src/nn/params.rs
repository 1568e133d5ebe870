use ndarray::Array2;
use rand::Rng;

/// Handle to one array of a [`ParameterSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// Named real arrays. Shapes are fixed once added. Gradients and optimizer
/// moments use the same type with identical layout.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterSet {
    names: Vec<String>,
    values: Vec<Array2<f64>>,
}

impl ParameterSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Panics if `name` is already taken.
    pub fn add(&mut self, name: impl Into<String>, value: Array2<f64>) -> ParamId {
        let name = name.into();
        assert!(self.id(&name).is_none(), "duplicate parameter name {name}");
        self.names.push(name);
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    /// Uniform on `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn add_uniform<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        shape: (usize, usize),
        fan_in: usize,
        rng: &mut R,
    ) -> ParamId {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let value = Array2::from_shape_fn(shape, |_| rng.random_range(-bound..=bound));
        self.add(name, value)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Array2<f64> {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Array2<f64> {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    /// Number of arrays.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Total number of scalars.
    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array2<f64>)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    pub fn shapes(&self) -> Vec<(String, (usize, usize))> {
        self.iter().map(|(n, v)| (n.to_string(), v.dim())).collect()
    }

    pub fn same_layout(&self, other: &ParameterSet) -> bool {
        self.names == other.names && self.values.iter().zip(&other.values).all(|(a, b)| a.dim() == b.dim())
    }

    pub fn zeros_like(&self) -> ParameterSet {
        ParameterSet {
            names: self.names.clone(),
            values: self.values.iter().map(|v| Array2::zeros(v.dim())).collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        for v in &mut self.values {
            v.fill(0.0);
        }
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &ParameterSet, scale: f64) {
        debug_assert!(self.same_layout(other));
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            a.scaled_add(scale, b);
        }
    }

    /// Euclidean norm over every scalar.
    pub fn norm(&self) -> f64 {
        self.values.iter().flat_map(|v| v.iter()).map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            v.mapv_inplace(|x| x * factor);
        }
    }

    /// Target-network update `self <- tau * online + (1 - tau) * self`.
    pub fn soft_update(&mut self, online: &ParameterSet, tau: f64) {
        assert!(self.same_layout(online), "soft update between different layouts");
        for (t, w) in self.values.iter_mut().zip(&online.values) {
            t.zip_mut_with(w, |t, &w| *t = tau * w + (1.0 - tau) * *t);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|x| x.is_finite()))
    }
}
