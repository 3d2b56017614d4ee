//! Tower network: towers are merged into city cells (polygon membership or
//! single-linkage clustering) and the rest become rural singleton cells.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::io;

pub type CellId = u32;

#[derive(Debug, Clone, PartialEq)]
pub struct Tower {
    pub tower_id: String,
    pub x: f64,
    pub y: f64,
}

impl Tower {
    pub fn new(id: impl Into<String>, x: f64, y: f64) -> Tower {
        Tower {
            tower_id: id.into(),
            x,
            y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Zone {
    Urban,
    Rural,
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Zone::Urban => "urban",
            Zone::Rural => "rural",
        })
    }
}

impl FromStr for Zone {
    type Err = Error;
    fn from_str(s: &str) -> Result<Zone> {
        match s.trim() {
            "urban" => Ok(Zone::Urban),
            "rural" => Ok(Zone::Rural),
            other => Err(Error::data(format!("unknown zone `{other}`"))),
        }
    }
}

/// Closed planar ring; the last vertex connects back to the first.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub id: String,
    pub vertices: Vec<(f64, f64)>,
}

impl Polygon {
    /// Even-odd ray casting. Points on an edge count as inside.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let v = &self.vertices;
        let n = v.len();
        if n < 3 {
            return false;
        }
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let (xi, yi) = v[i];
            let (xj, yj) = v[j];
            if on_segment((xi, yi), (xj, yj), (x, y)) {
                return true;
            }
            if (yi > y) != (yj > y) {
                let cross = (xj - xi) * (y - yi) / (yj - yi) + xi;
                if x < cross {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }
}

fn on_segment(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> bool {
    let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
    if cross.abs() > 1e-9 * (1.0 + a.0.abs() + b.0.abs() + a.1.abs() + b.1.abs()) {
        return false;
    }
    p.0 >= a.0.min(b.0) && p.0 <= a.0.max(b.0) && p.1 >= a.1.min(b.1) && p.1 <= a.1.max(b.1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub cell_id: CellId,
    pub member_towers: Vec<String>,
    pub zone: Zone,
    pub region_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocationNetwork {
    pub cells: Vec<Cell>,
    pub tower_to_cell: HashMap<String, CellId>,
}

impl LocationNetwork {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell_of(&self, tower_id: &str) -> Option<CellId> {
        self.tower_to_cell.get(tower_id).copied()
    }

    pub fn region_of(&self, cell: CellId) -> &str {
        &self.cells[cell as usize].region_id
    }

    pub fn region_count(&self) -> usize {
        self.cells
            .iter()
            .map(|c| c.region_id.as_str())
            .collect::<BTreeSet<_>>()
            .len()
    }

    /// Network where every tower id is its own rural cell and region.
    /// Used by synthetic corpora, whose tower ids are `T<cell>`.
    pub fn trivial(n_cells: u32) -> LocationNetwork {
        let cells = (0..n_cells)
            .map(|c| Cell {
                cell_id: c,
                member_towers: vec![synthetic_tower_id(c)],
                zone: Zone::Rural,
                region_id: format!("R{c}"),
            })
            .collect::<Vec<_>>();
        let tower_to_cell = cells
            .iter()
            .map(|c| (c.member_towers[0].clone(), c.cell_id))
            .collect();
        LocationNetwork {
            cells,
            tower_to_cell,
        }
    }

    /// Attach region ids from a `cell_id -> (region_id, zone)` table.
    /// Urban cells keep a region of their own whatever the table says.
    pub fn assign_regions(mut self, table: &BTreeMap<CellId, (String, Zone)>) -> Result<Self> {
        for cell in &mut self.cells {
            let (region, _) = table.get(&cell.cell_id).ok_or_else(|| {
                Error::data(format!("region table has no entry for cell {}", cell.cell_id))
            })?;
            cell.region_id = match cell.zone {
                Zone::Urban => format!("city_{}", cell.cell_id),
                Zone::Rural => region.clone(),
            };
        }
        Ok(self)
    }

    /// `tower_id,cell_id,zone`, one row per tower, sorted by cell then tower.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = io::csv_writer(path)?;
        w.write_record(["tower_id", "cell_id", "zone", "region_id"])?;
        for cell in &self.cells {
            for t in &cell.member_towers {
                w.write_record([
                    t.as_str(),
                    &cell.cell_id.to_string(),
                    &cell.zone.to_string(),
                    &cell.region_id,
                ])?;
            }
        }
        io::finish_csv(path, w)
    }

    pub fn read_csv(path: &Path) -> Result<LocationNetwork> {
        let mut r = io::csv_reader(path)?;
        let cols = io::columns(path, r.headers()?, &["tower_id", "cell_id", "zone"])?;
        let region_col = r.headers()?.iter().position(|h| h == "region_id");
        let mut by_cell: BTreeMap<CellId, Cell> = BTreeMap::new();
        let mut tower_to_cell = HashMap::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = i as u64 + 2;
            let tower = rec[cols[0]].to_string();
            let cell: CellId = io::parse_field(path, line, &rec[cols[1]])?;
            let zone: Zone = rec[cols[2]]
                .parse()
                .map_err(|e: Error| io::parse_error(path, line, e.to_string()))?;
            let region = region_col
                .map(|c| rec[c].to_string())
                .unwrap_or_else(|| format!("R{cell}"));
            let entry = by_cell.entry(cell).or_insert_with(|| Cell {
                cell_id: cell,
                member_towers: Vec::new(),
                zone,
                region_id: region,
            });
            entry.member_towers.push(tower.clone());
            if tower_to_cell.insert(tower.clone(), cell).is_some() {
                return Err(io::parse_error(path, line, format!("tower `{tower}` listed twice")));
            }
        }
        let cells: Vec<Cell> = by_cell.into_values().collect();
        for (i, c) in cells.iter().enumerate() {
            if c.cell_id as usize != i {
                return Err(Error::data(format!(
                    "{}: cell ids must be contiguous from 0 (missing {i})",
                    path.display()
                )));
            }
        }
        Ok(LocationNetwork {
            cells,
            tower_to_cell,
        })
    }
}

pub fn synthetic_tower_id(cell: CellId) -> String {
    format!("T{cell}")
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Builds the cell partition.
///
/// Towers inside a city polygon (first polygon by id wins) form one urban
/// cell per polygon. The remaining towers are clustered by single linkage
/// with strict `distance < merge_radius`; clusters of two or more towers
/// become urban cells, singletons rural cells. Cell ids follow the order of
/// each cell's smallest tower id, so the result does not depend on input
/// order. Region ids default to one region per cell.
pub fn build_network(
    towers: &[Tower],
    polygons: &[Polygon],
    merge_radius: f64,
) -> Result<LocationNetwork> {
    if towers.is_empty() {
        return Err(Error::data("tower list is empty"));
    }
    if !(merge_radius >= 0.0) {
        return Err(Error::config(format!("merge radius must be >= 0, got {merge_radius}")));
    }
    let mut sorted: Vec<&Tower> = towers.iter().collect();
    sorted.sort_by(|a, b| a.tower_id.cmp(&b.tower_id));
    for w in sorted.windows(2) {
        if w[0].tower_id == w[1].tower_id {
            return Err(Error::data(format!("duplicate tower id `{}`", w[0].tower_id)));
        }
    }
    let mut seen = HashMap::new();
    for t in &sorted {
        if !t.x.is_finite() || !t.y.is_finite() {
            return Err(Error::data(format!("tower `{}` has non-finite coordinates", t.tower_id)));
        }
        if let Some(prev) = seen.insert((t.x.to_bits(), t.y.to_bits()), &t.tower_id) {
            return Err(Error::data(format!(
                "towers `{prev}` and `{}` share coordinates",
                t.tower_id
            )));
        }
    }

    let mut polys: Vec<&Polygon> = polygons.iter().collect();
    polys.sort_by(|a, b| a.id.cmp(&b.id));

    let n = sorted.len();
    let mut uf = UnionFind::new(n);
    let mut in_city = vec![false; n];
    let mut first_in_poly: Vec<Option<usize>> = vec![None; polys.len()];
    for (i, t) in sorted.iter().enumerate() {
        if let Some(p) = polys.iter().position(|p| p.contains(t.x, t.y)) {
            in_city[i] = true;
            match first_in_poly[p] {
                Some(j) => uf.union(i, j),
                None => first_in_poly[p] = Some(i),
            }
        }
    }

    let free: Vec<usize> = (0..n).filter(|&i| !in_city[i]).collect();
    let r2 = merge_radius * merge_radius;
    // Sort by x so each tower only scans neighbours within the radius band.
    let mut by_x = free.clone();
    by_x.sort_by(|&a, &b| sorted[a].x.total_cmp(&sorted[b].x));
    for (k, &i) in by_x.iter().enumerate() {
        for &j in &by_x[k + 1..] {
            let dx = sorted[j].x - sorted[i].x;
            if dx >= merge_radius {
                break;
            }
            let dy = sorted[j].y - sorted[i].y;
            if dx * dx + dy * dy < r2 {
                uf.union(i, j);
            }
        }
    }

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let root = uf.find(i);
        groups.entry(root).or_default().push(i);
    }
    // Roots are the smallest member index, and indices follow tower id order.
    let mut cells = Vec::with_capacity(groups.len());
    let mut tower_to_cell = HashMap::with_capacity(n);
    for (cell_id, members) in groups.into_values().enumerate() {
        let cell_id = cell_id as CellId;
        let urban = members.len() >= 2 || members.iter().any(|&i| in_city[i]);
        let member_towers: Vec<String> =
            members.iter().map(|&i| sorted[i].tower_id.clone()).collect();
        for t in &member_towers {
            tower_to_cell.insert(t.clone(), cell_id);
        }
        cells.push(Cell {
            cell_id,
            member_towers,
            zone: if urban { Zone::Urban } else { Zone::Rural },
            region_id: format!("R{cell_id}"),
        });
    }
    Ok(LocationNetwork {
        cells,
        tower_to_cell,
    })
}

pub fn read_towers(path: &Path) -> Result<Vec<Tower>> {
    let mut r = io::csv_reader(path)?;
    let cols = io::columns(path, r.headers()?, &["tower_id", "x", "y"])?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        out.push(Tower {
            tower_id: rec[cols[0]].to_string(),
            x: io::parse_field(path, line, &rec[cols[1]])?,
            y: io::parse_field(path, line, &rec[cols[2]])?,
        });
    }
    Ok(out)
}

pub fn read_polygons(path: &Path) -> Result<Vec<Polygon>> {
    let mut r = io::csv_reader(path)?;
    let cols = io::columns(path, r.headers()?, &["polygon_id", "vertex_index", "x", "y"])?;
    let mut rings: BTreeMap<String, Vec<(u64, f64, f64)>> = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        rings.entry(rec[cols[0]].to_string()).or_default().push((
            io::parse_field(path, line, &rec[cols[1]])?,
            io::parse_field(path, line, &rec[cols[2]])?,
            io::parse_field(path, line, &rec[cols[3]])?,
        ));
    }
    Ok(rings
        .into_iter()
        .map(|(id, mut v)| {
            v.sort_by_key(|p| p.0);
            Polygon {
                id,
                vertices: v.into_iter().map(|(_, x, y)| (x, y)).collect(),
            }
        })
        .collect())
}

pub fn read_region_table(path: &Path) -> Result<BTreeMap<CellId, (String, Zone)>> {
    let mut r = io::csv_reader(path)?;
    let cols = io::columns(path, r.headers()?, &["cell_id", "region_id", "zone"])?;
    let mut out = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        let cell: CellId = io::parse_field(path, line, &rec[cols[0]])?;
        let zone: Zone = rec[cols[2]]
            .parse()
            .map_err(|e: Error| io::parse_error(path, line, e.to_string()))?;
        out.insert(cell, (rec[cols[1]].to_string(), zone));
    }
    Ok(out)
}
