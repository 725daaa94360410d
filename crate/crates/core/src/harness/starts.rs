use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::environment::ScenarioConfig;
use crate::error::{config, Error, Result};
use crate::plume::{downwind_frame, Point3};

/// Evaluation start cells derived from the plume geometry.
///
/// * upwind: among edge cells upwind of the source, the one nearest the
///   source (ties: closest to the axis);
/// * downwind: the edge cell where the plume axis leaves the grid;
/// * crosswind: the edge cell on the left of the axis (seen looking
///   downwind) whose downwind distance is closest to that of the domain
///   centre.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalStarts {
    pub upwind: (usize, usize),
    pub downwind: (usize, usize),
    pub crosswind: (usize, usize),
}

pub fn canonical_starts(sc: &ScenarioConfig) -> Result<CanonicalStarts> {
    let cfg = &sc.plume;
    let cs = sc.cell_size();
    let (width, height) = (sc.grid_nx as f64 * cs, sc.grid_ny as f64 * cs);
    let src = cfg.source;
    if !(0.0..width).contains(&src.x) || !(0.0..height).contains(&src.y) {
        return Err(config("canonical starts need the source inside the grid"));
    }
    let frame = |(cx, cy): (usize, usize)| {
        let c = sc.cell_center(cx, cy);
        downwind_frame(Point3::new(c.x, c.y, src.z), cfg)
    };
    let edges = sc.edge_cells();

    let upwind = edges
        .iter()
        .copied()
        .filter(|&c| frame(c).0 < 0.0)
        .min_by(|&a, &b| {
            let dist2 = |(cx, cy): (usize, usize)| {
                let c = sc.cell_center(cx, cy);
                (c.x - src.x).powi(2) + (c.y - src.y).powi(2)
            };
            dist2(a).total_cmp(&dist2(b)).then(frame(a).1.abs().total_cmp(&frame(b).1.abs()))
        })
        .ok_or_else(|| config("no edge cell lies upwind of the source"))?;

    let (ux, uy) = cfg.downwind_unit();
    let exit = [(ux, src.x, width), (uy, src.y, height)]
        .into_iter()
        .filter(|(u, _, _)| u.abs() > 1e-12)
        .map(|(u, p, hi)| if u > 0.0 { (hi - p) / u } else { -p / u })
        .fold(f64::INFINITY, f64::min);
    let to_cell = |v: f64, n: usize| ((v / cs).floor().max(0.0) as usize).min(n - 1);
    let downwind = (to_cell(src.x + exit * ux, sc.grid_nx), to_cell(src.y + exit * uy, sc.grid_ny));

    let centre_dx = downwind_frame(Point3::new(width / 2.0, height / 2.0, src.z), cfg).0;
    let lateral = |sign: f64| {
        edges.iter().copied().filter(|&c| sign * frame(c).1 > 0.0).min_by(|&a, &b| {
            let (fa, fb) = (frame(a), frame(b));
            (fa.0 - centre_dx)
                .abs()
                .total_cmp(&(fb.0 - centre_dx).abs())
                .then(fb.1.abs().total_cmp(&fa.1.abs()))
        })
    };
    let crosswind = lateral(1.0)
        .or_else(|| lateral(-1.0))
        .ok_or_else(|| config("no edge cell lies beside the plume axis"))?;

    Ok(CanonicalStarts { upwind, downwind, crosswind })
}

/// Named or explicit start cell. Text form: `upwind`, `downwind`,
/// `crosswind` or `cx,cy`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum StartSpec {
    Upwind,
    Downwind,
    Crosswind,
    Cell(usize, usize),
}

impl StartSpec {
    pub const CANONICAL: [StartSpec; 3] = [StartSpec::Upwind, StartSpec::Downwind, StartSpec::Crosswind];

    pub fn resolve(&self, sc: &ScenarioConfig) -> Result<(usize, usize)> {
        let cell = match *self {
            StartSpec::Cell(cx, cy) => (cx, cy),
            named => {
                let c = canonical_starts(sc)?;
                match named {
                    StartSpec::Upwind => c.upwind,
                    StartSpec::Downwind => c.downwind,
                    _ => c.crosswind,
                }
            }
        };
        if !sc.in_grid(cell.0 as i64, cell.1 as i64) || !sc.is_edge(cell.0, cell.1) {
            return Err(config(format!("start cell {cell:?} is not on the grid edge")));
        }
        Ok(cell)
    }
}

impl fmt::Display for StartSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StartSpec::Upwind => f.write_str("upwind"),
            StartSpec::Downwind => f.write_str("downwind"),
            StartSpec::Crosswind => f.write_str("crosswind"),
            StartSpec::Cell(cx, cy) => write!(f, "{cx},{cy}"),
        }
    }
}

impl FromStr for StartSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "upwind" => Ok(StartSpec::Upwind),
            "downwind" => Ok(StartSpec::Downwind),
            "crosswind" => Ok(StartSpec::Crosswind),
            other => {
                let parsed = other
                    .split_once(',')
                    .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
                parsed
                    .map(|(cx, cy)| StartSpec::Cell(cx, cy))
                    .ok_or_else(|| Error::Parse(format!("bad start {other:?}: expected upwind, downwind, crosswind or cx,cy")))
            }
        }
    }
}

impl TryFrom<String> for StartSpec {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        value.parse()
    }
}

impl From<StartSpec> for String {
    fn from(value: StartSpec) -> Self {
        value.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry() {
        let sc = ScenarioConfig::default();
        let c = canonical_starts(&sc).unwrap();
        assert_eq!(c.upwind, (1, 9));
        assert_eq!(c.downwind, (8, 0));
        assert_eq!(c.crosswind, (9, 8));
        for cell in [c.upwind, c.downwind, c.crosswind] {
            assert!(sc.is_edge(cell.0, cell.1));
        }
    }

    #[test]
    fn parse_and_resolve() {
        let sc = ScenarioConfig::default();
        assert_eq!("upwind".parse::<StartSpec>().unwrap(), StartSpec::Upwind);
        assert_eq!(" 0, 3".parse::<StartSpec>().unwrap(), StartSpec::Cell(0, 3));
        assert!("middle".parse::<StartSpec>().is_err());
        assert_eq!(StartSpec::Cell(0, 3).resolve(&sc).unwrap(), (0, 3));
        assert!(StartSpec::Cell(4, 4).resolve(&sc).is_err());
        assert!(StartSpec::Cell(12, 0).resolve(&sc).is_err());
        assert_eq!(StartSpec::Cell(9, 2).to_string(), "9,2");
    }
}
