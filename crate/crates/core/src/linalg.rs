//! Closed-form linear algebra for symmetric 2x2 matrices.

/// Symmetric 2x2 matrix `[[a, b], [b, c]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sym2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Eigenpairs of a [`Sym2`], ordered so that `min_value <= max_value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigen2 {
    pub min_value: f64,
    pub max_value: f64,
    /// Unit eigenvector for `min_value`.
    pub min_vector: [f64; 2],
    /// Unit eigenvector for `max_value`, orthogonal to `min_vector`.
    pub max_vector: [f64; 2],
}

impl Sym2 {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Sym2 { a, b, c }
    }

    pub fn outer(v: [f64; 2]) -> Self {
        Sym2::new(v[0] * v[0], v[0] * v[1], v[1] * v[1])
    }

    pub fn as_array(&self) -> [[f64; 2]; 2] {
        [[self.a, self.b], [self.b, self.c]]
    }

    pub fn trace(&self) -> f64 {
        self.a + self.c
    }

    pub fn mul_vec(&self, v: [f64; 2]) -> [f64; 2] {
        [self.a * v[0] + self.b * v[1], self.b * v[0] + self.c * v[1]]
    }

    pub fn scale(&self, s: f64) -> Self {
        Sym2::new(self.a * s, self.b * s, self.c * s)
    }

    pub fn add(&self, o: &Sym2) -> Self {
        Sym2::new(self.a + o.a, self.b + o.b, self.c + o.c)
    }

    /// Spread between the two eigenvalues, `lambda_max - lambda_min`.
    pub fn eigen_gap(&self) -> f64 {
        let half_diff = 0.5 * (self.a - self.c);
        2.0 * half_diff.hypot(self.b)
    }

    /// Eigendecomposition from trace and discriminant.
    pub fn eigen(&self) -> Eigen2 {
        let mean = 0.5 * (self.a + self.c);
        let half_diff = 0.5 * (self.a - self.c);
        let radius = half_diff.hypot(self.b);
        let min_value = mean - radius;
        let max_value = mean + radius;

        let min_vector = if radius == 0.0 {
            [1.0, 0.0]
        } else {
            // Two algebraically equivalent null-space candidates of (A - lambda I);
            // take the one with the larger norm.
            let u = [self.b, min_value - self.a];
            let w = [min_value - self.c, self.b];
            let (nu, nw) = (u[0].hypot(u[1]), w[0].hypot(w[1]));
            if nu >= nw {
                [u[0] / nu, u[1] / nu]
            } else {
                [w[0] / nw, w[1] / nw]
            }
        };
        let max_vector = [-min_vector[1], min_vector[0]];
        Eigen2 { min_value, max_value, min_vector, max_vector }
    }
}

pub fn dot(u: [f64; 2], v: [f64; 2]) -> f64 {
    u[0] * v[0] + u[1] * v[1]
}

pub fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}
