//! Solenoidal loop basis on interior edges, selected by a tree–cotree split.

use std::collections::VecDeque;

use super::mesh::{VolumeMesh, TET_EDGE_LOCAL};
use super::vec3::*;
use crate::{Error, Result};

/// One loop function: piecewise-constant vector per attached tet.
#[derive(Debug, Clone)]
pub struct LoopFunction {
    pub edge: usize,
    /// `(tet, value)` with value = opposite-edge vector / tet volume.
    pub pieces: Vec<(usize, Vec3)>,
}

#[derive(Debug, Clone)]
pub struct LoopBasis {
    pub functions: Vec<LoopFunction>,
    /// Tree flag per mesh edge.
    pub twig: Vec<bool>,
}

impl LoopBasis {
    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn twig_count(&self) -> usize {
        self.twig.iter().filter(|&&t| t).count()
    }
}

/// Spanning tree of the node/edge graph that contains a spanning tree of the
/// boundary graph. Breadth-first, boundary first, neighbours in ascending edge id.
pub fn constrained_tree(mesh: &VolumeMesh) -> Result<Vec<bool>> {
    let n = mesh.nodes.len();
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (e, &[a, b]) in mesh.edges.iter().enumerate() {
        adj[a].push((e, b));
        adj[b].push((e, a));
    }
    for list in adj.iter_mut() {
        list.sort_unstable();
    }
    let used: Vec<bool> = {
        let mut u = vec![false; n];
        mesh.tets.iter().flatten().for_each(|&i| u[i] = true);
        u
    };
    let mut twig = vec![false; mesh.edges.len()];
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();

    let start = (0..n).find(|&i| mesh.boundary_node[i]).ok_or_else(|| Error::Topology {
        element: 0,
        msg: "mesh has no boundary nodes".into(),
    })?;
    seen[start] = true;
    queue.push_back(start);
    let mut order = Vec::new();
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &(e, w) in &adj[v] {
            if mesh.boundary_edge[e] && !seen[w] {
                seen[w] = true;
                twig[e] = true;
                queue.push_back(w);
            }
        }
    }
    if let Some(i) = (0..n).find(|&i| mesh.boundary_node[i] && !seen[i]) {
        return Err(Error::Unsupported(format!("boundary graph is disconnected (node {i} unreachable)")));
    }
    queue.extend(order);
    while let Some(v) = queue.pop_front() {
        for &(e, w) in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                twig[e] = true;
                queue.push_back(w);
            }
        }
    }
    if let Some(i) = (0..n).find(|&i| used[i] && !seen[i]) {
        return Err(Error::Topology { element: i, msg: "mesh graph is disconnected".into() });
    }
    Ok(twig)
}

/// Loop functions for the interior links of [`constrained_tree`].
///
/// Each function circulates around its edge `(a, b)`; in every attached tet the
/// value is the opposite edge vector `d − c`, oriented so that `det(b−a, c−a, d−a) > 0`,
/// divided by the tet volume. This makes the normal flux through every face
/// continuous and the normal trace on the boundary zero.
pub fn build_loop_basis(mesh: &VolumeMesh) -> Result<LoopBasis> {
    let chi = mesh.boundary.euler_characteristic();
    if chi != 2 {
        return Err(Error::Unsupported(format!(
            "only genus-0 bodies are supported (boundary Euler characteristic {chi})"
        )));
    }
    let twig = constrained_tree(mesh)?;
    let mut attached: Vec<Vec<(usize, usize)>> = vec![Vec::new(); mesh.edges.len()];
    for (t, te) in mesh.tet_edges.iter().enumerate() {
        for (k, &e) in te.iter().enumerate() {
            attached[e].push((t, k));
        }
    }
    let mut functions = Vec::new();
    for (e, &[a, b]) in mesh.edges.iter().enumerate() {
        if mesh.boundary_edge[e] || twig[e] {
            continue;
        }
        let (pa, pb) = (mesh.nodes[a], mesh.nodes[b]);
        let axis = sub(pb, pa);
        let pieces = attached[e]
            .iter()
            .map(|&(t, k)| {
                let tet = mesh.tets[t];
                let local = TET_EDGE_LOCAL[k];
                let others: Vec<usize> = (0..4).filter(|l| !local.contains(l)).map(|l| tet[l]).collect();
                let (mut c, mut d) = (mesh.nodes[others[0]], mesh.nodes[others[1]]);
                if dot(axis, cross(sub(c, pa), sub(d, pa))) < 0.0 {
                    std::mem::swap(&mut c, &mut d);
                }
                (t, scale(sub(d, c), 1.0 / mesh.volumes[t]))
            })
            .collect();
        functions.push(LoopFunction { edge: e, pieces });
    }
    Ok(LoopBasis { functions, twig })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::meshgen;

    #[test]
    fn single_tet_has_no_loops() {
        let m = meshgen::single_tet(1.0);
        let b = build_loop_basis(&m).unwrap();
        assert_eq!(b.len(), 0);
        assert_eq!(b.twig_count(), 3);
    }

    #[test]
    fn tree_spans_all_nodes() {
        let m = meshgen::cube_block(3, 1.0);
        let b = build_loop_basis(&m).unwrap();
        assert_eq!(b.twig_count(), m.nodes.len() - 1);
    }
}
