//! Serialization: JSON forms for edge sets, coupling fields and spin
//! configurations, plus a compact binary dump format for large sweeps.
//!
//! Binary layout: a 16-byte header (4-byte magic, u32 version, u32 n_cols,
//! u32 n_rows, all little-endian) followed by the payload — one little-endian
//! `f64` per edge for couplings, or one bit per vertex (1 = spin -1) for
//! spin configurations. Decoders validate the header and the exact payload
//! length before allocating.

use crate::ground_state::{CouplingField, SpinConfig};
use crate::lattice::{EdgeId, EdgeSet, GridGraph};
use crate::{Error, Result};

pub const MAGIC_COUPLINGS: [u8; 4] = *b"EAJ1";
pub const MAGIC_SPINS: [u8; 4] = *b"EAS1";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

/// JSON form of an edge set: an array of edge indices.
pub fn edge_set_to_json(set: &EdgeSet) -> String {
    serde_json::to_string(&set.to_indices()).expect("vector of indices serializes")
}

pub fn edge_set_from_json(graph: &GridGraph, json: &str) -> Result<EdgeSet> {
    let indices: Vec<EdgeId> =
        serde_json::from_str(json).map_err(|e| Error::Decode(format!("edge set JSON: {e}")))?;
    EdgeSet::from_indices(graph, &indices)
}

/// Human-readable form: a JSON list of vertex-coordinate pairs
/// `[[[x1,y1],[x2,y2]], ...]` in edge-index order.
pub fn edge_set_to_vertex_pairs_json(graph: &GridGraph, set: &EdgeSet) -> String {
    let pairs: Vec<[[usize; 2]; 2]> = set
        .iter()
        .map(|e| {
            let ((ax, ay), (bx, by)) = graph.edge_coords(e);
            [[ax, ay], [bx, by]]
        })
        .collect();
    serde_json::to_string(&pairs).expect("coordinate pairs serialize")
}

/// JSON form of a coupling field: an edge-indexed array of reals.
pub fn couplings_to_json(couplings: &CouplingField) -> String {
    serde_json::to_string(couplings.values()).expect("vector of reals serializes")
}

pub fn couplings_from_json(graph: &GridGraph, json: &str) -> Result<CouplingField> {
    let values: Vec<f64> =
        serde_json::from_str(json).map_err(|e| Error::Decode(format!("couplings JSON: {e}")))?;
    CouplingField::from_values(graph, values)
}

/// JSON form of a spin configuration: a vertex-indexed array of +-1.
pub fn spins_to_json(spins: &SpinConfig) -> String {
    serde_json::to_string(&spins.spins()).expect("vector of spins serializes")
}

pub fn spins_from_json(graph: &GridGraph, json: &str) -> Result<SpinConfig> {
    let values: Vec<i8> =
        serde_json::from_str(json).map_err(|e| Error::Decode(format!("spins JSON: {e}")))?;
    SpinConfig::from_spins(graph, &values)
}

fn write_header(out: &mut Vec<u8>, magic: [u8; 4], graph: &GridGraph) {
    out.extend_from_slice(&magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(graph.n_cols() as u32).to_le_bytes());
    out.extend_from_slice(&(graph.n_rows() as u32).to_le_bytes());
}

/// Largest vertex count a dump header may declare. Desk-scale experiments
/// are orders of magnitude below this; the cap bounds the allocation a
/// malformed or hostile header can demand.
const MAX_DUMP_VERTICES: usize = 1 << 20;

fn read_header(bytes: &[u8], magic: [u8; 4]) -> Result<GridGraph> {
    let (n_cols, n_rows) = header_dims(bytes, magic)?;
    GridGraph::build(n_cols, n_rows)
}

fn expected_coupling_payload(graph: &GridGraph) -> usize {
    graph.num_edges() * 8
}

/// Binary dump of a coupling field.
pub fn couplings_to_bytes(graph: &GridGraph, couplings: &CouplingField) -> Result<Vec<u8>> {
    if couplings.len() != graph.num_edges() {
        return Err(Error::ShapeMismatch(
            "coupling field does not match graph".into(),
        ));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + expected_coupling_payload(graph));
    write_header(&mut out, MAGIC_COUPLINGS, graph);
    for &v in couplings.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Decodes a coupling dump, returning the grid it was written for.
pub fn couplings_from_bytes(bytes: &[u8]) -> Result<(GridGraph, CouplingField)> {
    let pre = header_dims(bytes, MAGIC_COUPLINGS)?;
    let expected = pre
        .0
        .checked_mul(pre.1 - 1)
        .and_then(|a| (pre.1).checked_mul(pre.0 - 1).map(|b| a + b))
        .and_then(|e| e.checked_mul(8))
        .ok_or_else(|| Error::Decode("dump dimensions overflow".into()))?;
    if bytes.len() != HEADER_LEN + expected {
        return Err(Error::Decode(format!(
            "coupling payload length {} does not match header (expected {expected})",
            bytes.len() - HEADER_LEN.min(bytes.len())
        )));
    }
    let graph = read_header(bytes, MAGIC_COUPLINGS)?;
    let values: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let couplings = CouplingField::from_values(&graph, values)?;
    Ok((graph, couplings))
}

/// Validates magic, version and dimensions without building the graph.
fn header_dims(bytes: &[u8], magic: [u8; 4]) -> Result<(usize, usize)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Decode("dump shorter than its 16-byte header".into()));
    }
    if bytes[0..4] != magic {
        return Err(Error::Decode(format!(
            "bad magic {:?}, expected {:?}",
            &bytes[0..4],
            magic
        )));
    }
    let field = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let version = field(4);
    if version != FORMAT_VERSION {
        return Err(Error::Decode(format!(
            "unsupported dump version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let (c, r) = (field(8) as usize, field(12) as usize);
    if c == 0 || r == 0 {
        return Err(Error::Decode("dump header has a zero dimension".into()));
    }
    match c.checked_mul(r) {
        Some(v) if v <= MAX_DUMP_VERTICES => Ok((c, r)),
        _ => Err(Error::Decode(format!(
            "dump dimensions {c}x{r} exceed the {MAX_DUMP_VERTICES}-vertex cap"
        ))),
    }
}

/// Binary dump of a spin configuration (one bit per vertex, 1 = spin -1).
pub fn spins_to_bytes(graph: &GridGraph, spins: &SpinConfig) -> Result<Vec<u8>> {
    if spins.num_vertices() != graph.num_vertices() {
        return Err(Error::ShapeMismatch(
            "spin configuration does not match graph".into(),
        ));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + graph.num_vertices().div_ceil(8));
    write_header(&mut out, MAGIC_SPINS, graph);
    let mut byte = 0u8;
    for v in 0..graph.num_vertices() {
        if spins.spin(v) < 0 {
            byte |= 1 << (v % 8);
        }
        if v % 8 == 7 {
            out.push(byte);
            byte = 0;
        }
    }
    if !graph.num_vertices().is_multiple_of(8) {
        out.push(byte);
    }
    Ok(out)
}

pub fn spins_from_bytes(bytes: &[u8]) -> Result<(GridGraph, SpinConfig)> {
    let (c, r) = header_dims(bytes, MAGIC_SPINS)?;
    let vertices = c
        .checked_mul(r)
        .ok_or_else(|| Error::Decode("dump dimensions overflow".into()))?;
    let expected = vertices.div_ceil(8);
    if bytes.len() != HEADER_LEN + expected {
        return Err(Error::Decode(format!(
            "spin payload length does not match header (expected {expected} bytes)"
        )));
    }
    // Trailing padding bits must be zero so encode(decode(x)) == x.
    if !vertices.is_multiple_of(8) {
        let last = bytes[bytes.len() - 1];
        if last >> (vertices % 8) != 0 {
            return Err(Error::Decode("nonzero padding bits in spin dump".into()));
        }
    }
    let graph = read_header(bytes, MAGIC_SPINS)?;
    let mut spins = SpinConfig::all_plus(&graph);
    for v in 0..vertices {
        if bytes[HEADER_LEN + v / 8] >> (v % 8) & 1 == 1 {
            spins.flip(v);
        }
    }
    Ok((graph, spins))
}
