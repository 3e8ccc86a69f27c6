//! Quadrature on triangles and intervals.

/// Rule on the reference triangle, in barycentric coordinates.
///
/// Weights sum to one, so `int_K f = |K| * sum_q w_q f(x_q)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl TriangleRule {
    /// 16-point symmetric rule, exact up to degree 8 (Dunavant).
    pub fn degree8() -> Self {
        let mut rule = TriangleRule { points: Vec::new(), weights: Vec::new(), degree: 8 };
        rule.push_orbit1(0.144_315_607_677_787);
        rule.push_orbit3(0.459_292_588_292_723, 0.095_091_634_267_285);
        rule.push_orbit3(0.170_569_307_751_760, 0.103_217_370_534_718);
        rule.push_orbit3(0.050_547_228_317_031, 0.032_458_497_623_198);
        rule.push_orbit6(0.008_394_777_409_958, 0.263_112_829_634_638, 0.027_230_314_174_435);
        rule
    }

    /// Collapsed (Duffy) Gauss-Legendre product rule with `n` points per direction,
    /// exact up to degree `2n - 2`.
    pub fn collapsed_gauss(n: usize) -> Self {
        let gl = GaussLegendre::new(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (u, wu) in gl.nodes.iter().zip(&gl.weights) {
            for (v, wv) in gl.nodes.iter().zip(&gl.weights) {
                let xi = *u;
                let eta = v * (1.0 - u);
                points.push([1.0 - xi - eta, xi, eta]);
                weights.push(2.0 * wu * wv * (1.0 - u));
            }
        }
        TriangleRule { points, weights, degree: 2 * n - 2 }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn push_orbit1(&mut self, w: f64) {
        self.points.push([1.0 / 3.0; 3]);
        self.weights.push(w);
    }

    fn push_orbit3(&mut self, a: f64, w: f64) {
        let b = 1.0 - 2.0 * a;
        for p in [[b, a, a], [a, b, a], [a, a, b]] {
            self.points.push(p);
            self.weights.push(w);
        }
    }

    fn push_orbit6(&mut self, a: f64, b: f64, w: f64) {
        let c = 1.0 - a - b;
        for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
            self.points.push(p);
            self.weights.push(w);
        }
    }
}

/// Gauss-Legendre rule on `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d.is_finite() {
                dp = d;
            }
            // map [-1, 1] -> [0, 1]
            nodes[n - 1 - i] = 0.5 * (x + 1.0);
            weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
        }
        GaussLegendre { nodes, weights }
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// `int_T x^i y^j` over the reference triangle, divided by its area 1/2.
    fn monomial_mean(i: u32, j: u32) -> f64 {
        2.0 * factorial(i) * factorial(j) / factorial(i + j + 2)
    }

    fn check_exactness(rule: &TriangleRule, degree: u32, tol: f64) {
        for i in 0..=degree {
            for j in 0..=(degree - i) {
                let q: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(b, w)| w * b[1].powi(i as i32) * b[2].powi(j as i32))
                    .sum();
                let exact = monomial_mean(i, j);
                assert!((q - exact).abs() <= tol * exact, "x^{i} y^{j}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn degree8_is_exact_on_monomials() {
        let rule = TriangleRule::degree8();
        assert_eq!(rule.len(), 16);
        let wsum: f64 = rule.weights.iter().sum();
        assert!((wsum - 1.0).abs() < 1e-14);
        check_exactness(&rule, 8, 1e-13);
        for p in &rule.points {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            assert!(p.iter().all(|&l| l > 0.0));
        }
    }

    #[test]
    fn degree8_is_not_exact_at_degree_ten() {
        let rule = TriangleRule::degree8();
        let q: f64 = rule.points.iter().zip(&rule.weights).map(|(b, w)| w * b[1].powi(10)).sum();
        assert!((q - monomial_mean(10, 0)).abs() > 1e-8);
    }

    #[test]
    fn collapsed_gauss_exactness() {
        let rule = TriangleRule::collapsed_gauss(8);
        assert_eq!(rule.degree, 14);
        check_exactness(&rule, 14, 1e-12);
    }

    #[test]
    fn gauss_legendre_interval() {
        let gl = GaussLegendre::new(5);
        for k in 0..10 {
            let q: f64 = gl.nodes.iter().zip(&gl.weights).map(|(x, w)| w * x.powi(k)).sum();
            assert!((q - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "k={k}");
        }
        let one = GaussLegendre::new(1);
        assert!((one.nodes[0] - 0.5).abs() < 1e-15);
        assert!((one.weights[0] - 1.0).abs() < 1e-15);
    }
}
