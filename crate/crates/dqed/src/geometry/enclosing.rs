//! Smallest enclosing sphere by Welzl's randomized incremental algorithm.

use super::vec3::*;

const REL_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug)]
struct Ball {
    c: Vec3,
    r2: f64,
}

impl Ball {
    fn contains(&self, p: Vec3, scale: f64) -> bool {
        let d = sub(p, self.c);
        dot(d, d).sqrt() <= self.r2.sqrt() + REL_TOL * scale
    }
}

fn ball2(a: Vec3, b: Vec3) -> Ball {
    let c = scale(add(a, b), 0.5);
    Ball { c, r2: dot(sub(a, c), sub(a, c)) }
}

fn ball3(a: Vec3, b: Vec3, c: Vec3) -> Ball {
    // Circumcenter of a triangle, in its plane.
    let ab = sub(b, a);
    let ac = sub(c, a);
    let n = cross(ab, ac);
    let n2 = dot(n, n);
    if n2 <= 1e-300 {
        let cands = [ball2(a, b), ball2(a, c), ball2(b, c)];
        return cands.into_iter().fold(cands[0], |m, x| if x.r2 > m.r2 { x } else { m });
    }
    let t1 = scale(cross(n, ab), dot(ac, ac));
    let t2 = scale(cross(ac, n), dot(ab, ab));
    let off = scale(add(t1, t2), 0.5 / n2);
    Ball { c: add(a, off), r2: dot(off, off) }
}

fn ball4(a: Vec3, b: Vec3, c: Vec3, d: Vec3) -> Ball {
    let rows = [sub(b, a), sub(c, a), sub(d, a)];
    let rhs = rows.map(|r| 0.5 * dot(r, r));
    let det = dot(rows[0], cross(rows[1], rows[2]));
    if det.abs() <= 1e-14 * rows.iter().map(|r| dot(*r, *r)).fold(0.0, f64::max).powf(1.5) {
        let cands = [ball3(a, b, c), ball3(a, b, d), ball3(a, c, d), ball3(b, c, d)];
        return cands.into_iter().fold(cands[0], |m, x| if x.r2 > m.r2 { x } else { m });
    }
    // Cramer's rule for rows · x = rhs.
    let x = scale(
        add(add(scale(cross(rows[1], rows[2]), rhs[0]), scale(cross(rows[2], rows[0]), rhs[1])), scale(cross(rows[0], rows[1]), rhs[2])),
        1.0 / det,
    );
    Ball { c: add(a, x), r2: dot(x, x) }
}

/// Returns `(center, radius)` of the smallest sphere containing `points`.
pub fn min_enclosing_sphere(points: &[Vec3]) -> (Vec3, f64) {
    if points.is_empty() {
        return ([0.0; 3], 0.0);
    }
    let mut p = points.to_vec();
    // Fixed-seed shuffle keeps the result deterministic.
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    for i in (1..p.len()).rev() {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        p.swap(i, (state % (i as u64 + 1)) as usize);
    }
    let scale_ref = p.iter().map(|q| norm(sub(*q, p[0]))).fold(1e-300, f64::max);
    let mut b = Ball { c: p[0], r2: 0.0 };
    for i in 1..p.len() {
        if b.contains(p[i], scale_ref) {
            continue;
        }
        b = Ball { c: p[i], r2: 0.0 };
        for j in 0..i {
            if b.contains(p[j], scale_ref) {
                continue;
            }
            b = ball2(p[i], p[j]);
            for k in 0..j {
                if b.contains(p[k], scale_ref) {
                    continue;
                }
                b = ball3(p[i], p[j], p[k]);
                for l in 0..k {
                    if b.contains(p[l], scale_ref) {
                        continue;
                    }
                    b = ball4(p[i], p[j], p[k], p[l]);
                }
            }
        }
    }
    (b.c, b.r2.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regular_tetrahedron_circumsphere() {
        let s = 1.0 / 3f64.sqrt();
        let pts = [[s, s, s], [s, -s, -s], [-s, s, -s], [-s, -s, s]];
        let (c, r) = min_enclosing_sphere(&pts);
        assert!(norm(c) < 1e-12);
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn obtuse_triangle_uses_longest_side() {
        let pts = [[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [1.0, 0.1, 0.0]];
        let (c, r) = min_enclosing_sphere(&pts);
        assert!((r - 1.0).abs() < 1e-12);
        assert!(dist(c, [1.0, 0.0, 0.0]) < 1e-12);
    }

    #[test]
    fn interior_points_do_not_matter() {
        let mut pts = vec![[0.0, 0.0, 3.0], [0.0, 0.0, -3.0]];
        for i in 0..50 {
            let t = i as f64 * 0.37;
            pts.push([t.cos(), t.sin(), (t * 1.3).sin()]);
        }
        let (c, r) = min_enclosing_sphere(&pts);
        assert!((r - 3.0).abs() < 1e-12);
        assert!(norm(c) < 1e-12);
    }
}
