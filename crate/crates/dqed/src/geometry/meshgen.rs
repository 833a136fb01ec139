//! Programmatic meshes of simple bodies, mostly for tests and examples.

use std::collections::HashMap;
use std::f64::consts::PI;

use super::mesh::{SurfaceMesh, VolumeMesh};
use super::vec3::*;

/// Deduplicating node pool keyed by quantized coordinates.
struct Pool {
    nodes: Vec<Vec3>,
    index: HashMap<[i64; 3], usize>,
    quantum: f64,
}

impl Pool {
    fn new(quantum: f64) -> Self {
        Pool { nodes: Vec::new(), index: HashMap::new(), quantum }
    }

    fn add(&mut self, p: Vec3) -> usize {
        let key = p.map(|c| (c / self.quantum).round() as i64);
        let n = self.nodes.len();
        *self.index.entry(key).or_insert_with(|| {
            self.nodes.push(p);
            n
        })
    }
}

/// Splits triangle `(a, b, c)` into `f²` congruent triangles, adding the lattice
/// points to `pool` and returning the triangles (same orientation as the input).
fn subdivide(pool: &mut Pool, [a, b, c]: [Vec3; 3], f: usize) -> Vec<[usize; 3]> {
    let fl = f as f64;
    let mut id = vec![vec![0usize; f + 1]; f + 1];
    for i in 0..=f {
        for j in 0..=f - i {
            let (u, v) = (i as f64 / fl, j as f64 / fl);
            id[i][j] = pool.add(combo([1.0 - u - v, u, v], [a, b, c]));
        }
    }
    let mut tris = Vec::with_capacity(f * f);
    for i in 0..f {
        for j in 0..f - i {
            tris.push([id[i][j], id[i + 1][j], id[i][j + 1]]);
            if i + j + 1 < f {
                tris.push([id[i + 1][j], id[i + 1][j + 1], id[i][j + 1]]);
            }
        }
    }
    tris
}

fn icosahedron() -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let g = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, g, 0.0],
        [1.0, g, 0.0],
        [-1.0, -g, 0.0],
        [1.0, -g, 0.0],
        [0.0, -1.0, g],
        [0.0, 1.0, g],
        [0.0, -1.0, -g],
        [0.0, 1.0, -g],
        [g, 0.0, -1.0],
        [g, 0.0, 1.0],
        [-g, 0.0, -1.0],
        [-g, 0.0, 1.0],
    ];
    let nodes: Vec<Vec3> = raw.iter().map(|&p| normalize(p)).collect();
    let mut faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for f in faces.iter_mut() {
        let [a, b, c] = f.map(|i| nodes[i]);
        if dot(cross(sub(b, a), sub(c, a)), add(add(a, b), c)) < 0.0 {
            f.swap(1, 2);
        }
    }
    (nodes, faces)
}

/// Unit-sphere geodesic nodes and triangles of frequency `f` (`20 f²` triangles,
/// full icosahedral symmetry).
fn geodesic_unit(f: usize) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let f = f.max(1);
    let (ico, faces) = icosahedron();
    let mut pool = Pool::new(1e-10);
    let mut tris = Vec::with_capacity(20 * f * f);
    for face in &faces {
        tris.extend(subdivide(&mut pool, face.map(|i| ico[i]), f));
    }
    let nodes = pool.nodes.into_iter().map(normalize).collect();
    (nodes, tris)
}

/// Geodesic sphere surface of radius `radius`.
pub fn geodesic_sphere(f: usize, radius: f64) -> SurfaceMesh {
    let (nodes, tris) = geodesic_unit(f);
    SurfaceMesh::new(nodes.into_iter().map(|p| scale(p, radius)).collect(), tris).expect("valid geodesic sphere")
}

/// Ball made of one tet per geodesic surface triangle, all sharing the center.
pub fn cone_ball(f: usize, radius: f64) -> VolumeMesh {
    layered_ball(f, &[radius])
}

/// Ball with a cone core of radius `inner * radius` wrapped by one prism shell.
pub fn shell_ball(f: usize, radius: f64, inner: f64) -> VolumeMesh {
    layered_ball(f, &[inner * radius, radius])
}

/// Ball with a cone core out to `radii[0]` and prism shells between successive radii.
///
/// Each prism is split into 14 tets around its centroid, with every
/// quadrilateral side fanned from its own center so neighbours conform.
pub fn layered_ball(f: usize, radii: &[f64]) -> VolumeMesh {
    assert!(!radii.is_empty() && radii.windows(2).all(|w| w[0] < w[1]) && radii[0] > 0.0);
    let (unit, tris) = geodesic_unit(f);
    let m = unit.len();
    let mut nodes: Vec<Vec3> = vec![[0.0; 3]];
    for &r in radii {
        nodes.extend(unit.iter().map(|&p| scale(p, r)));
    }
    let layer = |l: usize, i: usize| 1 + l * m + i;
    let mut tets: Vec<[usize; 4]> = tris.iter().map(|t| [0, layer(0, t[0]), layer(0, t[1]), layer(0, t[2])]).collect();
    for l in 0..radii.len() - 1 {
        let mut quad_center: HashMap<[usize; 2], usize> = HashMap::new();
        for t in &tris {
            let bot = t.map(|i| layer(l, i));
            let top = t.map(|i| layer(l + 1, i));
            let pts: Vec<Vec3> = bot.iter().chain(&top).map(|&i| nodes[i]).collect();
            let c = nodes.len();
            nodes.push(scale(pts.iter().fold([0.0; 3], |s, p| add(s, *p)), 1.0 / 6.0));
            tets.push([c, bot[0], bot[1], bot[2]]);
            tets.push([c, top[0], top[1], top[2]]);
            for k in 0..3 {
                let (i, j) = (t[k], t[(k + 1) % 3]);
                let key = if i < j { [i, j] } else { [j, i] };
                let q = *quad_center.entry(key).or_insert_with(|| {
                    let corners = [layer(l, i), layer(l, j), layer(l + 1, i), layer(l + 1, j)];
                    let p = scale(corners.iter().fold([0.0; 3], |s, &n| add(s, nodes[n])), 0.25);
                    nodes.push(p);
                    nodes.len() - 1
                });
                let ring = [layer(l, i), layer(l, j), layer(l + 1, j), layer(l + 1, i)];
                for s in 0..4 {
                    tets.push([c, q, ring[s], ring[(s + 1) % 4]]);
                }
            }
        }
    }
    VolumeMesh::new(nodes, tets).expect("valid layered ball")
}

/// Unit-disk triangulation with `rings` concentric hexagonal rings mapped onto
/// circles. Returns nodes in the plane and counter-clockwise triangles.
pub fn disk_2d(rings: usize) -> (Vec<[f64; 2]>, Vec<[usize; 3]>) {
    let n = rings.max(1);
    let corner = |s: usize| {
        let a = s as f64 * PI / 3.0;
        [a.cos(), a.sin(), 0.0]
    };
    let mut pool = Pool::new(1e-10);
    let mut tris = Vec::new();
    for s in 0..6 {
        tris.extend(subdivide(&mut pool, [[0.0; 3], corner(s), corner(s + 1)], n));
    }
    let hex_norm = |p: Vec3| {
        (0..6)
            .map(|s| {
                let a = s as f64 * PI / 3.0 + PI / 6.0;
                (p[0] * a.cos() + p[1] * a.sin()) / (PI / 6.0).cos()
            })
            .fold(0.0, f64::max)
    };
    let nodes = pool
        .nodes
        .iter()
        .map(|&p| {
            let rho = hex_norm(p);
            if rho < 1e-12 {
                [0.0, 0.0]
            } else {
                let phi = p[1].atan2(p[0]);
                [rho * phi.cos(), rho * phi.sin()]
            }
        })
        .collect();
    (nodes, tris)
}

/// Circular cylinder of given radius and height, centred at the origin with
/// its axis along z. Prisms are split into three tets with diagonals chosen by
/// global vertex index, which keeps the mesh conforming.
pub fn cylinder(radius: f64, height: f64, rings: usize, layers: usize) -> VolumeMesh {
    let (pts, tris) = disk_2d(rings);
    let layers = layers.max(1);
    let m = pts.len();
    let mut nodes = Vec::with_capacity(m * (layers + 1));
    for l in 0..=layers {
        let z = -0.5 * height + height * l as f64 / layers as f64;
        nodes.extend(pts.iter().map(|p| [radius * p[0], radius * p[1], z]));
    }
    let mut tets = Vec::with_capacity(3 * tris.len() * layers);
    for l in 0..layers {
        for t in &tris {
            let mut s = *t;
            s.sort_unstable();
            let [a, b, c] = s.map(|i| l * m + i);
            let [a2, b2, c2] = s.map(|i| (l + 1) * m + i);
            tets.push([a, b, c, c2]);
            tets.push([a, b, b2, c2]);
            tets.push([a, a2, b2, c2]);
        }
    }
    VolumeMesh::new(nodes, tets).expect("valid cylinder")
}

/// Thin disk: a cylinder whose height is `aspect` times its diameter.
pub fn disk(radius: f64, aspect: f64, rings: usize, layers: usize) -> VolumeMesh {
    cylinder(radius, 2.0 * radius * aspect, rings, layers)
}

/// Corner tet with legs of length `s` along the axes.
pub fn single_tet(s: f64) -> VolumeMesh {
    VolumeMesh::new(vec![[0.0; 3], [s, 0.0, 0.0], [0.0, s, 0.0], [0.0, 0.0, s]], vec![[0, 1, 2, 3]]).expect("valid tet")
}

/// Two tets glued along a common face.
pub fn two_tets(s: f64) -> VolumeMesh {
    VolumeMesh::new(
        vec![[0.0; 3], [s, 0.0, 0.0], [0.0, s, 0.0], [0.0, 0.0, s], [s, s, s]],
        vec![[0, 1, 2, 3], [1, 2, 3, 4]],
    )
    .expect("valid tet pair")
}

/// Cube of side `side` centred at the origin, `n³` cells, six Kuhn tets per cell.
pub fn cube_block(n: usize, side: f64) -> VolumeMesh {
    let n = n.max(1);
    let h = side / n as f64;
    let id = |i: usize, j: usize, k: usize| (i * (n + 1) + j) * (n + 1) + k;
    let mut nodes = Vec::with_capacity((n + 1).pow(3));
    for i in 0..=n {
        for j in 0..=n {
            for k in 0..=n {
                nodes.push([i as f64 * h - 0.5 * side, j as f64 * h - 0.5 * side, k as f64 * h - 0.5 * side]);
            }
        }
    }
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut tets = Vec::with_capacity(6 * n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for p in PERMS {
                    let mut c = [i, j, k];
                    let mut tet = [id(c[0], c[1], c[2]); 4];
                    for (s, &axis) in p.iter().enumerate() {
                        c[axis] += 1;
                        tet[s + 1] = id(c[0], c[1], c[2]);
                    }
                    tets.push(tet);
                }
            }
        }
    }
    VolumeMesh::new(nodes, tets).expect("valid cube block")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geodesic_counts() {
        for f in 1..5 {
            let s = geodesic_sphere(f, 1.0);
            assert_eq!(s.len(), 20 * f * f);
            assert_eq!(s.nodes.len(), 10 * f * f + 2);
            assert_eq!(s.euler_characteristic(), 2);
        }
    }

    #[test]
    fn ball_volumes_converge() {
        let exact = 4.0 / 3.0 * PI;
        let coarse = cone_ball(2, 1.0).total_volume();
        let fine = cone_ball(6, 1.0).total_volume();
        assert!((exact - fine).abs() < (exact - coarse).abs());
        assert!((fine / exact - 1.0).abs() < 0.03);
    }

    #[test]
    fn shell_ball_counts() {
        let m = shell_ball(3, 1.0, 0.7);
        assert_eq!(m.len(), 20 * 9 * 15);
        assert_eq!(m.boundary.len(), 180);
        let inner_sphere_vol: f64 = cone_ball(3, 0.7).total_volume();
        let outer: f64 = cone_ball(3, 1.0).total_volume();
        assert!((m.total_volume() - outer).abs() < 1e-12 * outer);
        assert!(inner_sphere_vol < outer);
    }

    #[test]
    fn cylinder_volume() {
        let m = cylinder(1.0, 0.5, 6, 2);
        let (pts, tris) = disk_2d(6);
        let area: f64 = tris
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| pts[i]);
                0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
            })
            .sum();
        assert!(tris.iter().all(|t| {
            let [a, b, c] = t.map(|i| pts[i]);
            (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]) > 0.0
        }));
        assert!((m.total_volume() - 0.5 * area).abs() < 1e-12);
        assert_eq!(m.boundary.euler_characteristic(), 2);
    }

    #[test]
    fn cube_block_volume() {
        let m = cube_block(3, 2.0);
        assert_eq!(m.len(), 162);
        assert!((m.total_volume() - 8.0).abs() < 1e-12);
        assert!((m.radius - 3f64.sqrt()).abs() < 1e-12);
    }
}
