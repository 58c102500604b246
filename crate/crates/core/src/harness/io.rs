//! Text formats: edge lists, partition files and CSV tables.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use crate::error::{LrpError, Result};
use crate::lattice::Lattice;
use crate::params::Geometry;
use crate::renorm::Partition;

/// Shortest round-trip decimal form, independent of locale.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else if x != 0.0 && (x.abs() < 1e-5 || x.abs() >= 1e16) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// A CSV table with `#`-prefixed metadata lines above the header.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            meta: Vec::new(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(s, "# {k}={v}");
        }
        let _ = writeln!(s, "{}", self.header.join(","));
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.join(","));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut t = Table::default();
        let mut header_seen = false;
        for line in text.lines() {
            if let Some(m) = line.strip_prefix("# ") {
                if let Some((k, v)) = m.split_once('=') {
                    t.meta.push((k.to_string(), v.to_string()));
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let cells: Vec<String> = line.split(',').map(str::to_string).collect();
            if !header_seen {
                t.header = cells;
                header_seen = true;
            } else {
                if cells.len() != t.header.len() {
                    return Err(LrpError::Schema(format!(
                        "row has {} cells, header has {}",
                        cells.len(),
                        t.header.len()
                    )));
                }
                t.rows.push(cells);
            }
        }
        if !header_seen {
            return Err(LrpError::Schema("no header row".into()));
        }
        Ok(t)
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| LrpError::Schema(format!("missing column {name}")))
    }

    pub fn floats(&self, name: &str) -> Result<Vec<f64>> {
        let c = self.column(name)?;
        self.rows
            .iter()
            .map(|r| {
                r[c].parse::<f64>()
                    .map_err(|_| LrpError::Schema(format!("column {name}: bad number {:?}", r[c])))
            })
            .collect()
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_csv())
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

/// Header line of an edge-list file.
pub fn edge_list_header(lattice: &Lattice, seed: u64) -> String {
    format!(
        "lrp v1 d={} N={} geom={} seed={}",
        lattice.d,
        lattice.n,
        lattice.geometry.as_str(),
        seed
    )
}

/// Writes `u v` lines with `u < v`, sorted.
pub fn write_edge_list(path: &Path, lattice: &Lattice, seed: u64, edges: &[(u32, u32)]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut sorted: Vec<(u32, u32)> = edges.iter().map(|&(u, v)| (u.min(v), u.max(v))).collect();
    sorted.sort_unstable();
    sorted.dedup();
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{}", edge_list_header(lattice, seed))?;
    for (u, v) in sorted {
        writeln!(w, "{u} {v}")?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeListFile {
    pub lattice: Lattice,
    pub seed: u64,
    pub edges: Vec<(u32, u32)>,
}

pub fn parse_edge_list_header(line: &str) -> Result<(Lattice, u64)> {
    let mut it = line.split_whitespace();
    if it.next() != Some("lrp") || it.next() != Some("v1") {
        return Err(LrpError::Schema(format!("not an lrp v1 edge list: {line:?}")));
    }
    let (mut d, mut n, mut geom, mut seed) = (None, None, None, None);
    for tok in it {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| LrpError::Schema(format!("bad header token {tok:?}")))?;
        let bad = || LrpError::Schema(format!("bad header value {tok:?}"));
        match k {
            "d" => d = Some(v.parse::<usize>().map_err(|_| bad())?),
            "N" => n = Some(v.parse::<u64>().map_err(|_| bad())?),
            "geom" => {
                geom = Some(match v {
                    "box" => Geometry::Box,
                    "torus" => Geometry::Torus,
                    _ => return Err(bad()),
                })
            }
            "seed" => seed = Some(v.parse::<u64>().map_err(|_| bad())?),
            _ => return Err(LrpError::Schema(format!("unknown header key {k:?}"))),
        }
    }
    match (d, n, geom, seed) {
        (Some(d), Some(n), Some(g), Some(s)) => Ok((Lattice::new(d, n, g)?, s)),
        _ => Err(LrpError::Schema("edge-list header is incomplete".into())),
    }
}

pub fn read_edge_list(path: &Path) -> Result<EdgeListFile> {
    let f = std::io::BufReader::new(fs::File::open(path)?);
    let mut lines = f.lines();
    let head = lines
        .next()
        .ok_or_else(|| LrpError::Schema("empty edge-list file".into()))??;
    let (lattice, seed) = parse_edge_list_header(&head)?;
    let nv = lattice.num_vertices() as u64;
    let mut edges = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut p = line.split_whitespace();
        let parse = |t: Option<&str>| -> Result<u32> {
            t.and_then(|x| x.parse::<u32>().ok())
                .ok_or_else(|| LrpError::Schema(format!("line {}: bad edge {line:?}", i + 2)))
        };
        let u = parse(p.next())?;
        let v = parse(p.next())?;
        if p.next().is_some() || u >= v || v as u64 >= nv {
            return Err(LrpError::Schema(format!("line {}: bad edge {line:?}", i + 2)));
        }
        edges.push((u, v));
    }
    Ok(EdgeListFile {
        lattice,
        seed,
        edges,
    })
}

/// `vertex,part_id` rows for allocated vertices, ascending by vertex.
pub fn partition_vertex_table(partition: &Partition) -> Table {
    let mut t = Table::new(&["vertex", "part_id"]);
    for (v, &p) in partition.part_of.iter().enumerate() {
        if p != crate::renorm::UNALLOCATED {
            t.push(vec![v.to_string(), p.to_string()]);
        }
    }
    t
}

/// Part metadata; `diameter` is `NA` for a disconnected part.
pub fn partition_part_table(partition: &Partition) -> Table {
    let mut t = Table::new(&["part_id", "anchor_block", "volume", "diameter", "is_core_count"]);
    for p in &partition.parts {
        t.push(vec![
            p.id.to_string(),
            p.anchor_block.to_string(),
            p.volume.to_string(),
            p.diameter.map_or("NA".to_string(), |d| d.to_string()),
            p.core_count.to_string(),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_list_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let lat = Lattice::new(1, 3, Geometry::Torus).unwrap();
        let path = dir.path().join("g.txt");
        write_edge_list(&path, &lat, 42, &[(3, 1), (0, 6), (1, 3)]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "lrp v1 d=1 N=3 geom=torus seed=42\n0 6\n1 3\n");
        let back = read_edge_list(&path).unwrap();
        assert_eq!(back.lattice, lat);
        assert_eq!(back.seed, 42);
        assert_eq!(back.edges, vec![(0, 6), (1, 3)]);
    }

    #[test]
    fn edge_list_rejects_bad_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.txt");
        for body in ["2 1\n", "0 7\n", "0 1 2\n", "x y\n"] {
            fs::write(&path, format!("lrp v1 d=1 N=3 geom=box seed=1\n{body}")).unwrap();
            assert!(read_edge_list(&path).is_err(), "{body:?}");
        }
        fs::write(&path, "lrp v2 d=1 N=3 geom=box seed=1\n").unwrap();
        assert!(read_edge_list(&path).is_err());
        fs::write(&path, "lrp v1 d=1 N=3 seed=1\n").unwrap();
        assert!(read_edge_list(&path).is_err());
    }

    #[test]
    fn table_round_trip() {
        let mut t = Table::new(&["a", "b"]);
        t.meta("seed", 7);
        t.push(vec![fmt_f64(0.1), fmt_f64(f64::NAN)]);
        t.push(vec![fmt_f64(1e-300), fmt_f64(-2.0)]);
        let csv = t.to_csv();
        assert_eq!(csv, "# seed=7\na,b\n0.1,NaN\n1e-300,-2\n");
        let back = Table::parse(&csv).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.floats("a").unwrap(), vec![0.1, 1e-300]);
        assert!(back.floats("c").is_err());
        assert!(Table::parse("# only=meta\n").is_err());
    }
}
