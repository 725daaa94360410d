use std::fmt::Write as _;
use std::path::Path;

use crate::environment::EpisodeRecord;
use crate::error::{Error, Result};
use crate::qlearning::{Policy, QTable};

/// Shipped grid-path baseline, one `cx,cy` per line.
pub const DEFAULT_GRID_PATH: &str = include_str!("../../data/grid_path.txt");

const QTABLE_MAGIC: &str = "hotspot-qtable v1";

pub fn default_grid_path() -> Vec<(usize, usize)> {
    parse_path(DEFAULT_GRID_PATH).expect("shipped grid path parses")
}

/// Text form of a Q-table:
///
/// ```text
/// hotspot-qtable v1
/// shape 10 10 16 5
/// values
/// <one value per line, row-major over (cx, cy, t, action)>
/// visits
/// <one count per line, same order>
/// ```
pub fn qtable_text(q: &QTable) -> String {
    let [nx, ny, nt, na] = q.shape();
    let mut out = String::with_capacity(q.values().len() * 28 + 64);
    let _ = writeln!(out, "{QTABLE_MAGIC}\nshape {nx} {ny} {nt} {na}\nvalues");
    for v in q.values() {
        let _ = writeln!(out, "{v}");
    }
    out.push_str("visits\n");
    for v in q.visit_counts() {
        let _ = writeln!(out, "{v}");
    }
    out
}

pub fn parse_qtable(text: &str) -> Result<QTable> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let mut expect = |want: &str| match lines.next() {
        Some(l) if l == want => Ok(()),
        other => Err(Error::Parse(format!("q-table: expected {want:?}, got {other:?}"))),
    };
    expect(QTABLE_MAGIC)?;
    let shape_line = lines.next().unwrap_or_default();
    let dims: Vec<usize> = shape_line
        .strip_prefix("shape ")
        .map(|s| s.split_whitespace().map(str::parse).collect::<std::result::Result<_, _>>())
        .transpose()
        .map_err(|e| Error::Parse(format!("q-table shape {shape_line:?}: {e}")))?
        .unwrap_or_default();
    let shape: [usize; 4] = dims
        .try_into()
        .map_err(|_| Error::Parse(format!("q-table: bad shape line {shape_line:?}")))?;
    let len = shape.iter().product::<usize>();

    let mut section = |name: &str| -> Result<Vec<&str>> {
        match lines.next() {
            Some(l) if l == name => Ok(lines.by_ref().take(len).collect()),
            other => Err(Error::Parse(format!("q-table: expected {name:?} section, got {other:?}"))),
        }
    };
    let values = section("values")?
        .into_iter()
        .map(|l| l.parse::<f64>().map_err(|e| Error::Parse(format!("q-table value {l:?}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let visits = section("visits")?
        .into_iter()
        .map(|l| l.parse::<u64>().map_err(|e| Error::Parse(format!("q-table visit count {l:?}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    if let Some(extra) = lines.next() {
        return Err(Error::Parse(format!("q-table: trailing data {extra:?}")));
    }
    QTable::from_parts(shape, values, visits)
}

/// One `cx,cy` per line.
pub fn path_text(cells: &[(usize, usize)]) -> String {
    let mut out = String::new();
    for (cx, cy) in cells {
        let _ = writeln!(out, "{cx},{cy}");
    }
    out
}

/// Parses `cx,cy` lines; blank lines and `#` comments are skipped.
pub fn parse_path(text: &str) -> Result<Vec<(usize, usize)>> {
    let cells = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split_once(',')
                .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)))
                .ok_or_else(|| Error::Parse(format!("bad path cell {l:?}, expected cx,cy")))
        })
        .collect::<Result<Vec<_>>>()?;
    if cells.is_empty() {
        return Err(Error::Parse("path file has no cells".into()));
    }
    Ok(cells)
}

/// Q-table text becomes a greedy policy, anything else is read as a path.
pub fn parse_policy(text: &str) -> Result<Policy> {
    if text.trim_start().starts_with(QTABLE_MAGIC) {
        parse_qtable(text).map(Policy::Greedy)
    } else {
        parse_path(text).map(Policy::FixedPath)
    }
}

/// Loads a policy file. The name `grid-path` selects the shipped baseline.
pub fn load_policy(source: &str) -> Result<Policy> {
    if source == "grid-path" {
        return Ok(Policy::FixedPath(default_grid_path()));
    }
    let text = std::fs::read_to_string(Path::new(source))
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("policy {source}: {e}"))))?;
    parse_policy(&text)
}

/// JSON Lines, one record per line.
pub fn records_text(records: &[EpisodeRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_json_line()?);
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_records(text: &str) -> Result<Vec<EpisodeRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(EpisodeRecord::from_json_line)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{AgentState, Environment, ResetOptions, ScenarioConfig};
    use crate::qlearning::{rollout, train, TrainConfig};
    use crate::rng::seeded;
    use crate::scoring::RewardKind;
    use proptest::prelude::*;

    #[test]
    fn shipped_path_is_valid() {
        let sc = ScenarioConfig::default();
        let path = default_grid_path();
        assert_eq!(path.len(), 16);
        assert_eq!(path[0], (0, 6));
        assert!(sc.is_edge(path[0].0, path[0].1));
        Policy::FixedPath(path).validate(&sc).unwrap();
    }

    #[test]
    fn trained_table_round_trips() {
        let sc = ScenarioConfig::default();
        let cfg = TrainConfig { episodes: 200, seed: 4, ..TrainConfig::default() };
        let q = train(&cfg, &sc).unwrap().table;
        let text = qtable_text(&q);
        assert!(text.starts_with("hotspot-qtable v1\nshape 10 10 16 5\nvalues\n"));
        assert_eq!(parse_qtable(&text).unwrap(), q);
        assert_eq!(parse_policy(&text).unwrap(), Policy::Greedy(q));
    }

    #[test]
    fn qtable_parse_errors() {
        let q = QTable::zeros(2, 2, 2);
        let good = qtable_text(&q);
        assert!(parse_qtable(&good.replace("v1", "v2")).is_err());
        assert!(parse_qtable(&good.replace("shape 2 2 2 5", "shape 2 2 5")).is_err());
        assert!(parse_qtable(&good.replace("shape 2 2 2 5", "shape 2 2 2 4")).is_err());
        assert!(parse_qtable(&format!("{good}0\n")).is_err());
        let truncated: String = good.lines().take(20).map(|l| format!("{l}\n")).collect();
        assert!(parse_qtable(&truncated).is_err());
    }

    #[test]
    fn path_parse_errors() {
        assert!(parse_path("").is_err());
        assert!(parse_path("# nothing\n").is_err());
        assert!(parse_path("1;2\n").is_err());
        assert_eq!(parse_path("1, 2 # start\n\n2,2\n").unwrap(), vec![(1, 2), (2, 2)]);
    }

    #[test]
    fn missing_policy_file() {
        assert!(matches!(load_policy("/nonexistent/q.txt"), Err(Error::Io(_))));
        assert_eq!(load_policy("grid-path").unwrap(), Policy::FixedPath(default_grid_path()));
    }

    #[test]
    fn policy_files_load_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("path.txt");
        std::fs::write(&file, path_text(&default_grid_path())).unwrap();
        assert_eq!(load_policy(file.to_str().unwrap()).unwrap(), Policy::FixedPath(default_grid_path()));
    }

    #[test]
    fn records_round_trip() {
        let sc = ScenarioConfig::default();
        let mut recs = Vec::new();
        for kind in RewardKind::ALL {
            let mut env = Environment::new(sc.clone(), kind).unwrap();
            let policy = Policy::FixedPath(default_grid_path());
            recs.push(rollout(&policy, &mut env, &ResetOptions::default(), &mut seeded(9)).unwrap());
        }
        let mut env = Environment::new(sc, RewardKind::KlGain).unwrap();
        env.reset(&ResetOptions::default(), &mut seeded(1)).unwrap();
        recs.push(env.record().unwrap().clone());
        let text = records_text(&recs).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(parse_records(&text).unwrap(), recs);
        assert!(recs[3].final_crps.is_none());
        assert_eq!(recs[3].path, vec![AgentState { cx: recs[3].start_cell.0, cy: recs[3].start_cell.1, t: 0 }]);
    }

    proptest! {
        #[test]
        fn table_text_round_trips(values in prop::collection::vec(-1e4..1e4f64, 40), visits in prop::collection::vec(0..u64::MAX, 40)) {
            let q = QTable::from_parts([2, 2, 2, 5], values, visits).unwrap();
            prop_assert_eq!(parse_qtable(&qtable_text(&q)).unwrap(), q);
        }

        #[test]
        fn path_text_round_trips(cells in prop::collection::vec((0usize..1000, 0usize..1000), 1..50)) {
            prop_assert_eq!(parse_path(&path_text(&cells)).unwrap(), cells);
        }
    }
}
