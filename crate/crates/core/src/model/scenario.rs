//! Displacement boundary-condition scenarios and the fixed 42-entry catalog.
//!
//! Catalog order (ids are positions in this list):
//!
//! | ids     | family                                                        |
//! |---------|---------------------------------------------------------------|
//! | 0-3     | full-edge clamp: left, right, top, bottom                     |
//! | 4-11    | half-edge clamp: each edge, first then second half            |
//! | 12-17   | two pinned corners: BL+BR, TL+TR, BL+TL, BR+TR, BL+TR, TL+BR   |
//! | 18-25   | pinned corner plus normal roller at the other end of an edge  |
//! | 26-29   | perpendicular full-edge rollers                               |
//! | 30-37   | full-edge normal roller plus a pinned corner on that edge     |
//! | 38-41   | clamps on opposite edges                                      |
//!
//! "First half" is the upper half of a vertical edge and the left half of a
//! horizontal edge. Half edges share their middle node.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DesignDomain, Grid};

pub const SCENARIO_COUNT: usize = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Edge {
    Left,
    Right,
    Top,
    Bottom,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::Left, Edge::Right, Edge::Top, Edge::Bottom];

    pub fn mirrored_vertically(self) -> Edge {
        match self {
            Edge::Top => Edge::Bottom,
            Edge::Bottom => Edge::Top,
            e => e,
        }
    }

    fn is_vertical(self) -> bool {
        matches!(self, Edge::Left | Edge::Right)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Corner {
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
}

impl Corner {
    pub fn mirrored_vertically(self) -> Corner {
        match self {
            Corner::TopLeft => Corner::BottomLeft,
            Corner::TopRight => Corner::BottomRight,
            Corner::BottomLeft => Corner::TopLeft,
            Corner::BottomRight => Corner::TopRight,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Half {
    First,
    Second,
}

/// A set of nodes on the boundary of the node grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeRegion {
    Edge { edge: Edge },
    HalfEdge { edge: Edge, half: Half },
    Corner { corner: Corner },
}

impl NodeRegion {
    /// Node indices covered by the region, in increasing order.
    pub fn nodes(&self, domain: &DesignDomain) -> Vec<usize> {
        let (nx, ny) = (domain.nelx, domain.nely);
        let edge_nodes = |edge: Edge, lo: usize, hi: usize| -> Vec<usize> {
            (lo..=hi)
                .map(|t| match edge {
                    Edge::Left => domain.node_index(0, t),
                    Edge::Right => domain.node_index(nx, t),
                    Edge::Top => domain.node_index(t, 0),
                    Edge::Bottom => domain.node_index(t, ny),
                })
                .collect()
        };
        let mut nodes = match *self {
            NodeRegion::Edge { edge } => {
                let len = if edge.is_vertical() { ny } else { nx };
                edge_nodes(edge, 0, len)
            }
            NodeRegion::HalfEdge { edge, half } => {
                let len = if edge.is_vertical() { ny } else { nx };
                match half {
                    Half::First => edge_nodes(edge, 0, len / 2),
                    Half::Second => edge_nodes(edge, len / 2, len),
                }
            }
            NodeRegion::Corner { corner } => vec![match corner {
                Corner::TopLeft => domain.node_index(0, 0),
                Corner::TopRight => domain.node_index(nx, 0),
                Corner::BottomLeft => domain.node_index(0, ny),
                Corner::BottomRight => domain.node_index(nx, ny),
            }],
        };
        nodes.sort_unstable();
        nodes
    }

    pub fn mirrored_vertically(&self) -> NodeRegion {
        match *self {
            NodeRegion::Edge { edge } => NodeRegion::Edge {
                edge: edge.mirrored_vertically(),
            },
            NodeRegion::HalfEdge { edge, half } => NodeRegion::HalfEdge {
                edge: edge.mirrored_vertically(),
                // on vertical edges the upper half becomes the lower half
                half: match (edge.is_vertical(), half) {
                    (true, Half::First) => Half::Second,
                    (true, Half::Second) => Half::First,
                    (false, h) => h,
                },
            },
            NodeRegion::Corner { corner } => NodeRegion::Corner {
                corner: corner.mirrored_vertically(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fixity {
    /// `ux = 0`
    Ux,
    /// `uy = 0`
    Uy,
    /// `ux = uy = 0`
    Pin,
}

impl Fixity {
    fn fixes_x(self) -> bool {
        matches!(self, Fixity::Ux | Fixity::Pin)
    }

    fn fixes_y(self) -> bool {
        matches!(self, Fixity::Uy | Fixity::Pin)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Constraint {
    pub region: NodeRegion,
    pub fixity: Fixity,
}

impl Constraint {
    pub fn new(region: NodeRegion, fixity: Fixity) -> Self {
        Self { region, fixity }
    }
}

/// Which displacement components are held at a node.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NodeFixity {
    pub ux: bool,
    pub uy: bool,
}

impl NodeFixity {
    pub fn is_pinned(&self) -> bool {
        self.ux && self.uy
    }
}

/// Per-node fixity after applying every constraint.
pub fn node_fixity(constraints: &[Constraint], domain: &DesignDomain) -> Vec<NodeFixity> {
    let mut fix = vec![NodeFixity::default(); domain.node_count()];
    for c in constraints {
        for n in c.region.nodes(domain) {
            fix[n].ux |= c.fixity.fixes_x();
            fix[n].uy |= c.fixity.fixes_y();
        }
    }
    fix
}

/// Sorted list of constrained displacement indices.
pub fn fixed_dofs(constraints: &[Constraint], domain: &DesignDomain) -> Vec<usize> {
    let mut dofs = Vec::new();
    for (n, f) in node_fixity(constraints, domain).iter().enumerate() {
        if f.ux {
            dofs.push(2 * n);
        }
        if f.uy {
            dofs.push(2 * n + 1);
        }
    }
    dofs
}

/// True when the constrained dofs suppress both translations and the in-plane
/// rotation, i.e. the 3-column matrix of rigid-mode values restricted to the
/// fixed dofs has full column rank.
pub fn removes_rigid_modes(constraints: &[Constraint], domain: &DesignDomain) -> bool {
    let scale = domain.nelx.max(domain.nely) as f64;
    let (xc, yc) = (domain.nelx as f64 / 2.0, domain.nely as f64 / 2.0);
    let mut gram = [[0.0f64; 3]; 3];
    for dof in fixed_dofs(constraints, domain) {
        let (ix, iy) = domain.node_coords(dof / 2);
        // physical coordinates with y pointing up
        let x = (ix as f64 - xc) / scale;
        let y = (domain.nely as f64 - iy as f64 - yc) / scale;
        let row = if dof % 2 == 0 {
            [1.0, 0.0, -y]
        } else {
            [0.0, 1.0, x]
        };
        for a in 0..3 {
            for b in 0..3 {
                gram[a][b] += row[a] * row[b];
            }
        }
    }
    symmetric_rank(gram, 1e-10) == 3
}

fn symmetric_rank(mut m: [[f64; 3]; 3], rel_tol: f64) -> usize {
    let scale = (m[0][0] + m[1][1] + m[2][2]).max(f64::MIN_POSITIVE);
    let mut rank = 0;
    let mut used = [false; 3];
    for _ in 0..3 {
        // full pivoting on the diagonal keeps this stable for SPD input
        let Some(p) = (0..3)
            .filter(|&i| !used[i])
            .max_by(|&a, &b| m[a][a].abs().total_cmp(&m[b][b].abs()))
        else {
            break;
        };
        if m[p][p].abs() <= rel_tol * scale {
            break;
        }
        used[p] = true;
        rank += 1;
        let pivot = m[p][p];
        let prow = m[p];
        for i in 0..3 {
            if i != p {
                let f = m[i][p] / pivot;
                for j in 0..3 {
                    m[i][j] -= f * prow[j];
                }
            }
        }
    }
    rank
}

/// One displacement boundary-condition scenario.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BcScenario {
    pub id: usize,
    pub constraints: Vec<Constraint>,
}

impl BcScenario {
    pub fn node_fixity(&self, domain: &DesignDomain) -> Vec<NodeFixity> {
        node_fixity(&self.constraints, domain)
    }

    pub fn fixed_dofs(&self, domain: &DesignDomain) -> Vec<usize> {
        fixed_dofs(&self.constraints, domain)
    }

    pub fn removes_rigid_modes(&self, domain: &DesignDomain) -> bool {
        removes_rigid_modes(&self.constraints, domain)
    }

    /// Boundary nodes where a load may be applied: every boundary node that is
    /// not fully pinned.
    pub fn admissible_load_nodes(&self, domain: &DesignDomain) -> Vec<usize> {
        let fix = self.node_fixity(domain);
        domain
            .boundary_nodes()
            .into_iter()
            .filter(|&n| !fix[n].is_pinned())
            .collect()
    }

    pub fn mirrored_vertically(&self) -> BcScenario {
        BcScenario {
            id: self.id,
            constraints: self
                .constraints
                .iter()
                .map(|c| Constraint::new(c.region.mirrored_vertically(), c.fixity))
                .collect(),
        }
    }
}

impl fmt::Display for NodeRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeRegion::Edge { edge } => write!(f, "{edge:?} edge"),
            NodeRegion::HalfEdge { edge, half } => write!(f, "{half:?} half of {edge:?} edge"),
            NodeRegion::Corner { corner } => write!(f, "{corner:?} corner"),
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fix = match self.fixity {
            Fixity::Ux => "ux=0",
            Fixity::Uy => "uy=0",
            Fixity::Pin => "ux=uy=0",
        };
        write!(f, "{} {}", self.region, fix)
    }
}

impl fmt::Display for BcScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}:", self.id)?;
        for (i, c) in self.constraints.iter().enumerate() {
            write!(f, "{} {c}", if i == 0 { "" } else { ";" })?;
        }
        Ok(())
    }
}

fn edge(edge: Edge) -> NodeRegion {
    NodeRegion::Edge { edge }
}

fn half(edge: Edge, half: Half) -> NodeRegion {
    NodeRegion::HalfEdge { edge, half }
}

fn corner(corner: Corner) -> NodeRegion {
    NodeRegion::Corner { corner }
}

/// The fixed catalog of 42 scenarios, in the order documented at the top of
/// this module.
pub fn enumerate_bc_scenarios() -> Vec<BcScenario> {
    use Corner::*;
    use Edge::*;
    use Fixity::*;

    let pin = |r| Constraint::new(r, Pin);
    let mut sets: Vec<Vec<Constraint>> = Vec::with_capacity(SCENARIO_COUNT);

    for e in Edge::ALL {
        sets.push(vec![pin(edge(e))]);
    }
    for e in Edge::ALL {
        for h in [Half::First, Half::Second] {
            sets.push(vec![pin(half(e, h))]);
        }
    }
    for (a, b) in [
        (BottomLeft, BottomRight),
        (TopLeft, TopRight),
        (BottomLeft, TopLeft),
        (BottomRight, TopRight),
        (BottomLeft, TopRight),
        (TopLeft, BottomRight),
    ] {
        sets.push(vec![pin(corner(a)), pin(corner(b))]);
    }
    // simply supported: pin one end of an edge, roller normal to the edge at the other
    for (a, b, roller) in [
        (BottomLeft, BottomRight, Uy),
        (BottomRight, BottomLeft, Uy),
        (TopLeft, TopRight, Uy),
        (TopRight, TopLeft, Uy),
        (TopLeft, BottomLeft, Ux),
        (BottomLeft, TopLeft, Ux),
        (TopRight, BottomRight, Ux),
        (BottomRight, TopRight, Ux),
    ] {
        sets.push(vec![pin(corner(a)), Constraint::new(corner(b), roller)]);
    }
    for (v, h) in [(Left, Bottom), (Left, Top), (Right, Bottom), (Right, Top)] {
        sets.push(vec![
            Constraint::new(edge(v), Ux),
            Constraint::new(edge(h), Uy),
        ]);
    }
    for (e, c, roller) in [
        (Left, BottomLeft, Ux),
        (Left, TopLeft, Ux),
        (Right, BottomRight, Ux),
        (Right, TopRight, Ux),
        (Bottom, BottomLeft, Uy),
        (Bottom, BottomRight, Uy),
        (Top, TopLeft, Uy),
        (Top, TopRight, Uy),
    ] {
        sets.push(vec![Constraint::new(edge(e), roller), pin(corner(c))]);
    }
    sets.push(vec![pin(edge(Left)), pin(edge(Right))]);
    sets.push(vec![pin(edge(Top)), pin(edge(Bottom))]);
    sets.push(vec![pin(half(Left, Half::Second)), pin(half(Right, Half::Second))]);
    sets.push(vec![pin(half(Left, Half::First)), pin(half(Right, Half::First))]);

    debug_assert_eq!(sets.len(), SCENARIO_COUNT);
    sets.into_iter()
        .enumerate()
        .map(|(id, constraints)| BcScenario { id, constraints })
        .collect()
}

#[derive(Serialize)]
struct CatalogEntry<'a> {
    id: usize,
    description: String,
    constraints: &'a [Constraint],
}

/// Human-readable catalog listing, one record per scenario.
pub fn catalog_document(catalog: &[BcScenario]) -> String {
    let entries: Vec<_> = catalog
        .iter()
        .map(|s| CatalogEntry {
            id: s.id,
            description: s.to_string(),
            constraints: &s.constraints,
        })
        .collect();
    serde_json::to_string_pretty(&entries).expect("catalog serializes")
}

/// SHA-256 (hex) of the compact JSON form of the catalog.
pub fn catalog_hash(catalog: &[BcScenario]) -> String {
    let bytes = serde_json::to_vec(catalog).expect("catalog serializes");
    let digest = Sha256::digest(&bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Element boundary-condition codes: 0 free, 1 `ux = 0`, 2 `uy = 0`,
/// 3 both. An element takes the strongest code among its four nodes; mixed
/// x-only and y-only nodes also give 3.
pub fn rasterize_bc(constraints: &[Constraint], domain: &DesignDomain) -> Grid<u8> {
    let fix = node_fixity(constraints, domain);
    Grid::from_fn(domain.nely, domain.nelx, |row, col| {
        let (mut x, mut y) = (false, false);
        for n in domain.element_nodes(row, col) {
            x |= fix[n].ux;
            y |= fix[n].uy;
        }
        match (x, y) {
            (true, true) => 3,
            (true, false) => 1,
            (false, true) => 2,
            (false, false) => 0,
        }
    })
}
