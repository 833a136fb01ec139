//! Quadrature rules and closed-form integrals of `1/R` and `(r − r′)/R³` over
//! flat triangles and tetrahedra.

use crate::geometry::vec3::*;

/// Symmetric 6-point rule on the triangle, exact for degree 4.
/// Barycentric points, weights summing to one.
pub const TRI6: [([f64; 3], f64); 6] = {
    const A1: f64 = 0.445948490915965;
    const A2: f64 = 0.091576213509771;
    const W1: f64 = 0.223381589678011;
    const W2: f64 = 0.109951743655322;
    [
        ([1.0 - 2.0 * A1, A1, A1], W1),
        ([A1, 1.0 - 2.0 * A1, A1], W1),
        ([A1, A1, 1.0 - 2.0 * A1], W1),
        ([1.0 - 2.0 * A2, A2, A2], W2),
        ([A2, 1.0 - 2.0 * A2, A2], W2),
        ([A2, A2, 1.0 - 2.0 * A2], W2),
    ]
};

/// Symmetric 3-point rule on the triangle, exact for degree 2.
pub const TRI3: [([f64; 3], f64); 3] = [
    ([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0], 1.0 / 3.0),
];

/// 4-point rule on the tetrahedron, exact for degree 2.
pub const TET4: [([f64; 4], f64); 4] = {
    const A: f64 = 0.585_410_196_624_968_5;
    const B: f64 = 0.138_196_601_125_010_5;
    [([A, B, B, B], 0.25), ([B, A, B, B], 0.25), ([B, B, A, B], 0.25), ([B, B, B, A], 0.25)]
};

/// Weighted points `(position, weight)` with weights carrying the measure.
pub type Rule = Vec<(Vec3, f64)>;

pub fn tri_rule(t: [Vec3; 3], base: &[([f64; 3], f64)]) -> Rule {
    let area = norm(tri_area_vector(t[0], t[1], t[2]));
    base.iter().map(|&(b, w)| (combo(b, t), w * area)).collect()
}

pub fn tet_rule(t: [Vec3; 4], base: &[([f64; 4], f64)]) -> Rule {
    let vol = tet_signed_volume(t[0], t[1], t[2], t[3]).abs();
    base.iter().map(|&(b, w)| (combo(b, t), w * vol)).collect()
}

fn mid(a: Vec3, b: Vec3) -> Vec3 {
    scale(add(a, b), 0.5)
}

/// Four congruent children of a triangle (midpoint subdivision).
pub fn split_tri(t: [Vec3; 3]) -> [[Vec3; 3]; 4] {
    let (m01, m12, m20) = (mid(t[0], t[1]), mid(t[1], t[2]), mid(t[2], t[0]));
    [[t[0], m01, m20], [m01, t[1], m12], [m20, m12, t[2]], [m01, m12, m20]]
}

/// Eight children of a tetrahedron of equal volume (midpoint subdivision,
/// inner octahedron cut along one diagonal), oriented like the parent.
pub fn split_tet(t: [Vec3; 4]) -> [[Vec3; 4]; 8] {
    let m = |i: usize, j: usize| mid(t[i], t[j]);
    let (m01, m02, m03, m12, m13, m23) = (m(0, 1), m(0, 2), m(0, 3), m(1, 2), m(1, 3), m(2, 3));
    let sign = tet_signed_volume(t[0], t[1], t[2], t[3]).signum();
    let mut children = [
        [t[0], m01, m02, m03],
        [m01, t[1], m12, m13],
        [m02, m12, t[2], m23],
        [m03, m13, m23, t[3]],
        [m01, m02, m03, m13],
        [m01, m02, m12, m13],
        [m02, m03, m13, m23],
        [m02, m12, m13, m23],
    ];
    for c in children.iter_mut() {
        if tet_signed_volume(c[0], c[1], c[2], c[3]) * sign < 0.0 {
            c.swap(1, 2);
        }
    }
    children
}

/// Base rule applied on each leaf of `levels` uniform subdivisions.
pub fn tri_rule_subdivided(t: [Vec3; 3], base: &[([f64; 3], f64)], levels: u32) -> Rule {
    if levels == 0 {
        return tri_rule(t, base);
    }
    split_tri(t).into_iter().flat_map(|c| tri_rule_subdivided(c, base, levels - 1)).collect()
}

pub fn tet_rule_subdivided(t: [Vec3; 4], base: &[([f64; 4], f64)], levels: u32) -> Rule {
    if levels == 0 {
        return tet_rule(t, base);
    }
    split_tet(t).into_iter().flat_map(|c| tet_rule_subdivided(c, base, levels - 1)).collect()
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Collapsed-square (Duffy) product rule on a triangle with `n×n` points.
pub fn tri_rule_duffy(t: [Vec3; 3], n: usize) -> Rule {
    let gl = gauss_legendre(n);
    let two_area = 2.0 * norm(tri_area_vector(t[0], t[1], t[2]));
    let mut rule = Vec::with_capacity(n * n);
    for &(u, wu) in &gl {
        for &(v, wv) in &gl {
            let (b1, b2) = (u * (1.0 - v), u * v);
            rule.push((combo([1.0 - b1 - b2, b1, b2], t), wu * wv * u * two_area));
        }
    }
    rule
}

/// Edge term `ln((R₊ + l₊)/(R₋ + l₋))` with the cancellation-free branch for
/// points behind the segment.
#[inline]
fn edge_log(rm: f64, rp: f64, lm: f64, lp: f64) -> f64 {
    if lp + lm >= 0.0 {
        ((rp + lp) / (rm + lm)).ln()
    } else {
        ((rm - lm) / (rp - lp)).ln()
    }
}

/// Signed solid angle of the triangle seen from `r` (Van Oosterom–Strackee);
/// negative on the side its normal points to.
#[inline]
pub fn solid_angle(r: Vec3, t: [Vec3; 3]) -> f64 {
    let (r1, r2, r3) = (sub(t[0], r), sub(t[1], r), sub(t[2], r));
    let (n1, n2, n3) = (norm(r1), norm(r2), norm(r3));
    let num = dot(r1, cross(r2, r3));
    let den = n1 * n2 * n3 + dot(r1, r2) * n3 + dot(r1, r3) * n2 + dot(r2, r3) * n1;
    2.0 * num.atan2(den)
}

/// `(∫_T dA′/R, ∫_T (r − r′)/R³ dA′)` in closed form.
///
/// The potential is continuous everywhere; the field is singular only on the
/// triangle's edges and jumps across its interior.
pub fn tri_integrals(r: Vec3, t: [Vec3; 3]) -> (f64, Vec3) {
    let av = tri_area_vector(t[0], t[1], t[2]);
    let n = normalize(av);
    let d = dot(sub(r, t[0]), n);
    let rho = sub(r, scale(n, d));
    let scale_ref = dist(t[0], t[1]).max(dist(t[1], t[2]));
    let mut pot = 0.0;
    let mut field = [0.0; 3];
    let mut rr = [0.0; 3];
    for k in 0..3 {
        rr[k] = dist(r, t[k]);
    }
    for k in 0..3 {
        let (a, b) = (t[k], t[(k + 1) % 3]);
        let e = sub(b, a);
        let th = normalize(e);
        let m = cross(th, n);
        let lp = dot(sub(b, rho), th);
        let lm = dot(sub(a, rho), th);
        let p0 = dot(sub(a, rho), m);
        let (rm, rp) = (rr[k], rr[(k + 1) % 3]);
        // On the edge segment itself the logarithm diverges; its potential weight is zero.
        let on_edge = p0.abs() <= 1e-14 * scale_ref && d.abs() <= 1e-14 * scale_ref && lm <= 0.0 && lp >= 0.0;
        if on_edge {
            continue;
        }
        let ln = edge_log(rm, rp, lm, lp);
        field = add(field, scale(m, ln));
        if p0.abs() > 1e-15 * scale_ref {
            pot += p0 * ln;
        }
    }
    let omega = if d.abs() <= 1e-14 * scale_ref { 0.0 } else { solid_angle(r, t) };
    pot -= d.abs() * omega.abs();
    field = sub(field, scale(n, omega));
    (pot, field)
}

/// `∫_T dA′/R`.
pub fn tri_potential(r: Vec3, t: [Vec3; 3]) -> f64 {
    tri_integrals(r, t).0
}

/// `∫_T (r − r′)/R³ dA′`.
pub fn tri_field(r: Vec3, t: [Vec3; 3]) -> Vec3 {
    tri_integrals(r, t).1
}

/// `∫_K dV′/R` over a tetrahedron, via `½ Σ_f h_f ∫_f dA′/R` with `h_f` the
/// signed distance from `r` to the outward face plane.
pub fn tet_potential(r: Vec3, t: [Vec3; 4]) -> f64 {
    let positive = tet_signed_volume(t[0], t[1], t[2], t[3]) > 0.0;
    let mut sum = 0.0;
    for f in crate::geometry::TET_FACE_LOCAL {
        let mut tri = f.map(|l| t[l]);
        if !positive {
            tri.swap(1, 2);
        }
        let n = normalize(tri_area_vector(tri[0], tri[1], tri[2]));
        let h = dot(sub(tri[0], r), n);
        if h.abs() > 0.0 {
            sum += h * tri_potential(r, tri);
        }
    }
    0.5 * sum
}

/// `∫_K (r − r′)/R³ dV′ = Σ_f n̂_f ∫_f dA′/R`.
pub fn tet_field(r: Vec3, t: [Vec3; 4]) -> Vec3 {
    let positive = tet_signed_volume(t[0], t[1], t[2], t[3]) > 0.0;
    let mut out = [0.0; 3];
    for f in crate::geometry::TET_FACE_LOCAL {
        let mut tri = f.map(|l| t[l]);
        if !positive {
            tri.swap(1, 2);
        }
        let n = normalize(tri_area_vector(tri[0], tri[1], tri[2]));
        out = add(out, scale(n, tri_potential(r, tri)));
    }
    out
}

/// Exact Euclidean distance from a point to a triangle.
pub fn point_triangle_distance(p: Vec3, t: [Vec3; 3]) -> f64 {
    let (a, b, c) = (t[0], t[1], t[2]);
    let (ab, ac, ap) = (sub(b, a), sub(c, a), sub(p, a));
    let (d1, d2) = (dot(ab, ap), dot(ac, ap));
    if d1 <= 0.0 && d2 <= 0.0 {
        return norm(ap);
    }
    let bp = sub(p, b);
    let (d3, d4) = (dot(ab, bp), dot(ac, bp));
    if d3 >= 0.0 && d4 <= d3 {
        return norm(bp);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return dist(p, add(a, scale(ab, v)));
    }
    let cp = sub(p, c);
    let (d5, d6) = (dot(ab, cp), dot(ac, cp));
    if d6 >= 0.0 && d5 <= d6 {
        return norm(cp);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return dist(p, add(a, scale(ac, w)));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return dist(p, add(b, scale(sub(c, b), w)));
    }
    let denom = 1.0 / (va + vb + vc);
    let (v, w) = (vb * denom, vc * denom);
    dist(p, add(a, add(scale(ab, v), scale(ac, w))))
}

pub fn tri_diameter(t: [Vec3; 3]) -> f64 {
    dist(t[0], t[1]).max(dist(t[1], t[2])).max(dist(t[2], t[0]))
}

/// Adaptive outer rule on the observation triangle `obs` for integrands that
/// are smooth except near the source triangle `src`: leaves are split until
/// `diam ≤ eta · dist(leaf centroid, src)` or `max_depth` is reached.
pub fn adaptive_tri_rule(obs: [Vec3; 3], src: [Vec3; 3], eta: f64, max_depth: u32) -> Rule {
    let mut out = Vec::new();
    let mut stack = vec![(obs, 0u32)];
    while let Some((t, depth)) = stack.pop() {
        let c = combo([1.0 / 3.0; 3], t);
        if depth >= max_depth || tri_diameter(t) <= eta * point_triangle_distance(c, src) {
            out.extend(tri_rule(t, &TRI6));
        } else {
            stack.extend(split_tri(t).into_iter().map(|s| (s, depth + 1)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_tri(r: Vec3, t: [Vec3; 3], n: usize) -> (f64, Vec3) {
        let mut pot = 0.0;
        let mut field = [0.0; 3];
        for (p, w) in tri_rule_duffy(t, n) {
            let d = sub(r, p);
            let rr = norm(d);
            pot += w / rr;
            field = add(field, scale(d, w / (rr * rr * rr)));
        }
        (pot, field)
    }

    const T: [Vec3; 3] = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.2, 0.9, 0.0]];

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let gl = gauss_legendre(5);
        let s: f64 = gl.iter().map(|&(x, w)| w * x.powi(9)).sum();
        assert!((s - 0.1).abs() < 1e-14);
        assert!((gl.iter().map(|g| g.1).sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn triangle_rules_exact_for_their_degree() {
        let f = |p: Vec3| p[0].powi(2) * p[1].powi(2);
        let exact: f64 = tri_rule_duffy(T, 10).iter().map(|(p, w)| w * f(*p)).sum();
        let six: f64 = tri_rule(T, &TRI6).iter().map(|(p, w)| w * f(*p)).sum();
        assert!((exact - six).abs() < 1e-12 * exact.abs().max(1e-3));
    }

    #[test]
    fn tet_subdivision_preserves_volume() {
        let t = [[0.0, 0.0, 0.0], [1.0, 0.1, 0.0], [0.2, 1.0, 0.1], [0.3, 0.2, 1.2]];
        let v = tet_signed_volume(t[0], t[1], t[2], t[3]);
        let sub_v: f64 = split_tet(t).iter().map(|c| tet_signed_volume(c[0], c[1], c[2], c[3])).sum();
        assert!((v - sub_v).abs() < 1e-14);
        assert!(split_tet(t).iter().all(|c| tet_signed_volume(c[0], c[1], c[2], c[3]) > 0.0));
    }

    #[test]
    fn triangle_integrals_match_brute_force_off_surface() {
        for r in [[0.3, 0.4, 0.2], [1.5, -0.3, -0.4], [0.3, 0.3, 0.05], [-0.5, 2.0, 0.0], [2.0, 0.0, 0.0]] {
            let (p, f) = tri_integrals(r, T);
            let (bp, bf) = brute_tri(r, T, 120);
            assert!((p - bp).abs() < 1e-6 * bp.abs(), "{r:?}: {p} vs {bp}");
            assert!(dist(f, bf) < 1e-5 * norm(bf).max(1.0), "{r:?}: {f:?} vs {bf:?}");
        }
    }

    #[test]
    fn potential_on_the_triangle_itself() {
        // Right-angle vertex of a right isosceles triangle of legs 1:
        // ∫ dθ/(cos θ + sin θ) over a quarter turn = √2 ln(1 + √2).
        let t = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let p = tri_potential([0.0, 0.0, 0.0], t);
        assert!((p - 2f64.sqrt() * (1.0 + 2f64.sqrt()).ln()).abs() < 1e-13);
        // Interior point: split at the point so each Duffy rule sees the
        // singularity at its collapsed vertex.
        let r = [0.25, 0.3, 0.0];
        let bp: f64 = (0..3).map(|k| brute_tri(r, [r, t[k], t[(k + 1) % 3]], 40).0).sum();
        let q = tri_potential(r, t);
        assert!((q - bp).abs() < 1e-10 * bp, "{q} vs {bp}");
    }

    #[test]
    fn field_is_minus_gradient_of_potential() {
        let r = [0.4, 0.7, 0.3];
        let h = 1e-5;
        let f = tri_field(r, T);
        for k in 0..3 {
            let mut rp = r;
            let mut rm = r;
            rp[k] += h;
            rm[k] -= h;
            let g = (tri_potential(rp, T) - tri_potential(rm, T)) / (2.0 * h);
            assert!((f[k] + g).abs() < 1e-7, "component {k}");
        }
    }

    #[test]
    fn tet_potential_matches_subdivided_quadrature() {
        let t = [[0.0, 0.0, 0.0], [1.0, 0.1, 0.0], [0.2, 1.0, 0.1], [0.3, 0.2, 1.2]];
        for r in [[3.0, 2.0, 1.0], [0.4, 0.4, 0.3]] {
            let exact = tet_potential(r, t);
            let q: f64 = tet_rule_subdivided(t, &TET4, 5).iter().map(|(p, w)| w / dist(r, *p)).sum();
            let tol = if dist(r, t[0]) > 2.0 { 1e-9 } else { 2e-3 };
            assert!((exact - q).abs() < tol * exact, "{exact} vs {q}");
        }
    }

    #[test]
    fn tet_field_matches_gradient() {
        let t = [[0.0, 0.0, 0.0], [1.0, 0.1, 0.0], [0.2, 1.0, 0.1], [0.3, 0.2, 1.2]];
        let r = [0.9, -0.4, 0.8];
        let f = tet_field(r, t);
        let h = 1e-5;
        for k in 0..3 {
            let mut rp = r;
            let mut rm = r;
            rp[k] += h;
            rm[k] -= h;
            let g = (tet_potential(rp, t) - tet_potential(rm, t)) / (2.0 * h);
            assert!((f[k] + g).abs() < 1e-7);
        }
    }

    #[test]
    fn solid_angle_of_closed_tet_surface() {
        let t = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let inside = [0.1, 0.1, 0.1];
        let total: f64 = crate::geometry::TET_FACE_LOCAL.iter().map(|f| solid_angle(inside, f.map(|l| t[l]))).sum();
        assert!((total - 4.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn point_triangle_distance_regions() {
        assert!((point_triangle_distance([0.3, 0.3, 2.0], T) - 2.0).abs() < 1e-15);
        assert!((point_triangle_distance([-1.0, 0.0, 0.0], T) - 1.0).abs() < 1e-15);
        assert!((point_triangle_distance([0.5, -0.5, 0.0], T) - 0.5).abs() < 1e-15);
    }
}
