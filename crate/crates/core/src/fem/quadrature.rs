//! Triangle quadrature rules in barycentric coordinates.

/// `(barycentric point, weight relative to the triangle area)`.
pub type QuadPoint = ([f64; 3], f64);

/// Edge-midpoint rule, exact for quadratics.
pub const EDGE_MIDPOINT: [QuadPoint; 3] = [
    ([0.5, 0.5, 0.0], 1.0 / 3.0),
    ([0.0, 0.5, 0.5], 1.0 / 3.0),
    ([0.5, 0.0, 0.5], 1.0 / 3.0),
];

const A1: f64 = 0.445_948_490_915_965;
const B1: f64 = 1.0 - 2.0 * A1;
const W1: f64 = 0.223_381_589_678_011;
const A2: f64 = 0.091_576_213_509_771;
const B2: f64 = 1.0 - 2.0 * A2;
const W2: f64 = 0.109_951_743_655_322;

/// Six-point Dunavant rule, exact for polynomials of degree 4.
pub const DUNAVANT4: [QuadPoint; 6] = [
    ([A1, A1, B1], W1),
    ([A1, B1, A1], W1),
    ([B1, A1, A1], W1),
    ([A2, A2, B2], W2),
    ([A2, B2, A2], W2),
    ([B2, A2, A2], W2),
];

pub fn map_point(bary: [f64; 3], p: &[[f64; 2]; 3]) -> [f64; 2] {
    [
        bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0],
        bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    /// ∫ over the reference triangle of x^a y^b = a! b! / (a+b+2)!.
    fn exact_monomial(a: u32, b: u32) -> f64 {
        let fact = |k: u32| (1..=k).map(f64::from).product::<f64>();
        fact(a) * fact(b) / fact(a + b + 2)
    }

    fn integrate(rule: &[QuadPoint], a: i32, b: i32) -> f64 {
        let tri = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        rule.iter()
            .map(|&(bary, w)| {
                let p = map_point(bary, &tri);
                w * 0.5 * p[0].powi(a) * p[1].powi(b)
            })
            .sum()
    }

    #[test]
    fn rules_reach_their_degree() {
        for (rule, degree) in [(&EDGE_MIDPOINT[..], 2), (&DUNAVANT4[..], 4)] {
            let wsum: f64 = rule.iter().map(|q| q.1).sum();
            assert!((wsum - 1.0).abs() < 1e-14);
            for a in 0..=degree {
                for b in 0..=degree - a {
                    let got = integrate(rule, a as i32, b as i32);
                    let want = exact_monomial(a, b);
                    assert!((got - want).abs() < 1e-13, "degree ({a},{b}): {got} vs {want}");
                }
            }
        }
    }
}
