//! Quadrature rules in barycentric coordinates; weights sum to one.

/// Degree-4 Dunavant rule on triangles (6 points).
pub const TRI_Q4: [([f64; 3], f64); 6] = {
    const A1: f64 = 0.445948490915965;
    const B1: f64 = 1.0 - 2.0 * A1;
    const W1: f64 = 0.223381589678011;
    const A2: f64 = 0.091576213509771;
    const B2: f64 = 1.0 - 2.0 * A2;
    const W2: f64 = 0.109951743655322;
    [
        ([B1, A1, A1], W1),
        ([A1, B1, A1], W1),
        ([A1, A1, B1], W1),
        ([B2, A2, A2], W2),
        ([A2, B2, A2], W2),
        ([A2, A2, B2], W2),
    ]
};

/// Three-point Gauss-Legendre rule on [0, 1].
pub const EDGE_G3: [(f64, f64); 3] = [
    (0.112701665379258311, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887298334620741689, 5.0 / 18.0),
];

#[cfg(test)]
mod tests {
    use super::*;

    fn tri_monomial(p: usize, q: usize) -> f64 {
        // exact ∫ λ1^p λ2^q over the unit reference triangle divided by its area
        let f = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
        2.0 * f(p) * f(q) / f(p + q + 2)
    }

    #[test]
    fn triangle_rule_degree_four() {
        for p in 0..=4 {
            for q in 0..=(4 - p) {
                let approx: f64 = TRI_Q4.iter().map(|(l, w)| w * l[1].powi(p as i32) * l[2].powi(q as i32)).sum();
                assert!((approx - tri_monomial(p, q)).abs() < 1e-14, "{p} {q}");
            }
        }
    }

    #[test]
    fn edge_rule_degree_five() {
        for k in 0..=5 {
            let approx: f64 = EDGE_G3.iter().map(|(t, w)| w * t.powi(k)).sum();
            assert!((approx - 1.0 / (k as f64 + 1.0)).abs() < 1e-15);
        }
    }
}
