use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::enclosing::min_enclosing_sphere;
use super::vec3::*;
use crate::{Error, Result};

/// Closed, outward-oriented triangulated surface.
#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    pub nodes: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    pub areas: Vec<f64>,
    pub normals: Vec<Vec3>,
    pub centroids: Vec<Vec3>,
}

impl SurfaceMesh {
    /// Builds the surface and checks closure, orientability and outward orientation.
    pub fn new(nodes: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let mut areas = Vec::with_capacity(triangles.len());
        let mut normals = Vec::with_capacity(triangles.len());
        let mut centroids = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= nodes.len()) {
                return Err(Error::Topology { element: t, msg: "node index out of range".into() });
            }
            let [a, b, c] = tri.map(|i| nodes[i]);
            let av = tri_area_vector(a, b, c);
            let area = norm(av);
            if !(area > 0.0) {
                return Err(Error::Topology { element: t, msg: "degenerate triangle".into() });
            }
            areas.push(area);
            normals.push(scale(av, 1.0 / area));
            centroids.push(combo([1.0 / 3.0; 3], [a, b, c]));
        }
        let mesh = SurfaceMesh { nodes, triangles, areas, normals, centroids };
        mesh.check_closed()?;
        let vol = mesh.signed_volume();
        if !(vol > 0.0) {
            return Err(Error::Orientation(format!("enclosed signed volume {vol:e} is not positive")));
        }
        Ok(mesh)
    }

    fn check_closed(&self) -> Result<()> {
        // Directed edge counts: a closed consistently oriented surface uses every
        // directed edge exactly once and its reverse exactly once.
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let e = (tri[k], tri[(k + 1) % 3]);
                if directed.insert(e, t).is_some() {
                    return Err(Error::Topology {
                        element: t,
                        msg: format!("edge {:?} used twice with the same orientation", e),
                    });
                }
            }
        }
        for (&(a, b), &t) in &directed {
            if !directed.contains_key(&(b, a)) {
                return Err(Error::Topology { element: t, msg: format!("open edge ({a}, {b})") });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn vertices(&self, t: usize) -> [Vec3; 3] {
        self.triangles[t].map(|i| self.nodes[i])
    }

    /// Volume enclosed by the surface (divergence theorem).
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|tri| {
                let [a, b, c] = tri.map(|i| self.nodes[i]);
                dot(a, cross(b, c)) / 6.0
            })
            .sum()
    }

    /// Undirected edges, sorted.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut e: Vec<[usize; 2]> = self
            .triangles
            .iter()
            .flat_map(|t| (0..3).map(move |k| sorted2(t[k], t[(k + 1) % 3])))
            .collect();
        e.sort_unstable();
        e.dedup();
        e
    }

    pub fn used_node_count(&self) -> usize {
        let mut used = vec![false; self.nodes.len()];
        for t in &self.triangles {
            for &i in t {
                used[i] = true;
            }
        }
        used.iter().filter(|&&u| u).count()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.used_node_count() as i64 - self.edges().len() as i64 + self.triangles.len() as i64
    }

    pub fn max_edge_length(&self) -> f64 {
        self.edges().iter().map(|e| dist(self.nodes[e[0]], self.nodes[e[1]])).fold(0.0, f64::max)
    }

    /// `Σ A_j n̂_j`, zero for a closed surface.
    pub fn area_vector_sum(&self) -> Vec3 {
        let mut s = [0.0; 3];
        for (a, n) in self.areas.iter().zip(&self.normals) {
            s = add(s, scale(*n, *a));
        }
        s
    }

    /// Copy with every node mapped through `f`.
    pub fn mapped(&self, f: impl Fn(Vec3) -> Vec3) -> Result<Self> {
        SurfaceMesh::new(self.nodes.iter().map(|&p| f(p)).collect(), self.triangles.clone())
    }
}

/// Conforming tetrahedral mesh with derived topology.
#[derive(Debug, Clone)]
pub struct VolumeMesh {
    pub nodes: Vec<Vec3>,
    pub tets: Vec<[usize; 4]>,
    pub volumes: Vec<f64>,
    /// Sorted undirected edges.
    pub edges: Vec<[usize; 2]>,
    /// Edge ids of each tet, ordered as (01, 02, 03, 12, 13, 23).
    pub tet_edges: Vec<[usize; 6]>,
    pub boundary_edge: Vec<bool>,
    pub boundary_node: Vec<bool>,
    /// Boundary faces as (tet, local face opposite to vertex k).
    pub boundary_faces: Vec<(usize, usize)>,
    /// Outward boundary surface; its node list is the full node list.
    pub boundary: SurfaceMesh,
    pub interior_face_count: usize,
    /// Radius and center of the smallest sphere containing all nodes.
    pub radius: f64,
    pub center: Vec3,
}

pub(crate) const TET_EDGE_LOCAL: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];

/// Local faces, each listed so that its normal (right-hand rule) points out of a
/// positively oriented tet; face k is opposite vertex k.
pub(crate) const TET_FACE_LOCAL: [[usize; 3]; 4] = [[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]];

fn sorted2(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

fn sorted3(mut f: [usize; 3]) -> [usize; 3] {
    f.sort_unstable();
    f
}

impl VolumeMesh {
    /// Builds topology, fixes inverted tets by swapping two vertices and validates
    /// conformity and closure of the boundary.
    pub fn new(nodes: Vec<Vec3>, mut tets: Vec<[usize; 4]>) -> Result<Self> {
        if tets.is_empty() {
            return Err(Error::Topology { element: 0, msg: "mesh has no tetrahedra".into() });
        }
        let mut volumes = Vec::with_capacity(tets.len());
        for (t, tet) in tets.iter_mut().enumerate() {
            if tet.iter().any(|&i| i >= nodes.len()) {
                return Err(Error::Topology { element: t, msg: "node index out of range".into() });
            }
            let [a, b, c, d] = tet.map(|i| nodes[i]);
            let mut v = tet_signed_volume(a, b, c, d);
            if v < 0.0 {
                tet.swap(1, 2);
                v = -v;
            }
            let scale_ref = dist(a, b).max(dist(a, c)).max(dist(a, d)).powi(3);
            if !(v > 1e-14 * scale_ref) {
                return Err(Error::Topology { element: t, msg: "degenerate tetrahedron".into() });
            }
            volumes.push(v);
        }

        let mut edge_map: HashMap<[usize; 2], usize> = HashMap::new();
        let mut all_edges: Vec<[usize; 2]> = tets
            .iter()
            .flat_map(|t| TET_EDGE_LOCAL.iter().map(move |l| sorted2(t[l[0]], t[l[1]])))
            .collect();
        all_edges.sort_unstable();
        all_edges.dedup();
        for (i, e) in all_edges.iter().enumerate() {
            edge_map.insert(*e, i);
        }
        let tet_edges: Vec<[usize; 6]> = tets
            .iter()
            .map(|t| TET_EDGE_LOCAL.map(|l| edge_map[&sorted2(t[l[0]], t[l[1]])]))
            .collect();

        let mut faces: HashMap<[usize; 3], Vec<(usize, usize)>> = HashMap::new();
        for (t, tet) in tets.iter().enumerate() {
            for (k, f) in TET_FACE_LOCAL.iter().enumerate() {
                let key = sorted3(f.map(|l| tet[l]));
                faces.entry(key).or_default().push((t, k));
            }
        }
        let mut boundary_faces = Vec::new();
        let mut interior_face_count = 0;
        for (key, owners) in &faces {
            match owners.len() {
                1 => boundary_faces.push(owners[0]),
                2 => interior_face_count += 1,
                _ => {
                    return Err(Error::Topology {
                        element: owners[2].0,
                        msg: format!("face {key:?} shared by more than two tetrahedra"),
                    })
                }
            }
        }
        boundary_faces.sort_unstable();
        let triangles: Vec<[usize; 3]> = boundary_faces
            .iter()
            .map(|&(t, k)| TET_FACE_LOCAL[k].map(|l| tets[t][l]))
            .collect();
        let boundary = SurfaceMesh::new(nodes.clone(), triangles).map_err(|e| match e {
            Error::Topology { element, msg } => Error::Topology {
                element: boundary_faces.get(element).map(|f| f.0).unwrap_or(element),
                msg: format!("non-conforming or open mesh: {msg}"),
            },
            other => other,
        })?;

        let mut boundary_edge = vec![false; all_edges.len()];
        let mut boundary_node = vec![false; nodes.len()];
        for tri in &boundary.triangles {
            for k in 0..3 {
                boundary_edge[edge_map[&sorted2(tri[k], tri[(k + 1) % 3])]] = true;
                boundary_node[tri[k]] = true;
            }
        }
        let used: Vec<Vec3> = {
            let mut u = vec![false; nodes.len()];
            tets.iter().flatten().for_each(|&i| u[i] = true);
            nodes.iter().zip(&u).filter(|(_, &k)| k).map(|(p, _)| *p).collect()
        };
        let (center, radius) = min_enclosing_sphere(&used);
        Ok(VolumeMesh {
            nodes,
            tets,
            volumes,
            edges: all_edges,
            tet_edges,
            boundary_edge,
            boundary_node,
            boundary_faces,
            boundary,
            interior_face_count,
            radius,
            center,
        })
    }

    pub fn len(&self) -> usize {
        self.tets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tets.is_empty()
    }

    pub fn vertices(&self, t: usize) -> [Vec3; 4] {
        self.tets[t].map(|i| self.nodes[i])
    }

    pub fn centroid(&self, t: usize) -> Vec3 {
        combo([0.25; 4], self.vertices(t))
    }

    pub fn diameter(&self, t: usize) -> f64 {
        let v = self.vertices(t);
        TET_EDGE_LOCAL.iter().map(|l| dist(v[l[0]], v[l[1]])).fold(0.0, f64::max)
    }

    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }

    pub fn interior_edge_count(&self) -> usize {
        self.boundary_edge.iter().filter(|&&b| !b).count()
    }

    /// Copy with every node mapped through `f` (orientation-preserving maps only).
    pub fn mapped(&self, f: impl Fn(Vec3) -> Vec3) -> Result<Self> {
        VolumeMesh::new(self.nodes.iter().map(|&p| f(p)).collect(), self.tets.clone())
    }

    /// SHA-256 over node coordinates and connectivity.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.nodes {
            for c in p {
                h.update(c.to_le_bytes());
            }
        }
        for t in &self.tets {
            for i in t {
                h.update((*i as u64).to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Boundary of a volume mesh as a standalone surface.
pub fn extract_boundary(mesh: &VolumeMesh) -> SurfaceMesh {
    mesh.boundary.clone()
}

/// Plain serializable form used for JSON dumps.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MeshDump {
    pub nodes: Vec<Vec3>,
    pub tets: Vec<[usize; 4]>,
    pub boundary: Vec<[usize; 3]>,
}

impl MeshDump {
    pub fn from_mesh(mesh: &VolumeMesh) -> Self {
        MeshDump { nodes: mesh.nodes.clone(), tets: mesh.tets.clone(), boundary: mesh.boundary.triangles.clone() }
    }

    pub fn to_mesh(&self) -> Result<VolumeMesh> {
        let mesh = VolumeMesh::new(self.nodes.clone(), self.tets.clone())?;
        if mesh.boundary.triangles != self.boundary {
            return Err(Error::Topology { element: 0, msg: "dumped boundary does not match tetrahedra".into() });
        }
        Ok(mesh)
    }
}
