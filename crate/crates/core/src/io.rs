//! JSON form of games and strategy profiles.
//!
//! ```json
//! {"dims": [2, 2], "class": "zero-sum",
//!  "blocks": [{"i": 0, "j": 1, "rows": 2, "cols": 2, "data": [1, 0, 0, 1]}],
//!  "costs": [0, 0, 0, 0]}
//! ```
//!
//! `data` is row-major. Symmetric classes list only blocks with `i < j`;
//! missing blocks are zero. Reals are written with 17 significant digits so
//! a write/read cycle is bit-exact.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format;
use crate::game::{AgentPartition, GameClass, InteractionBlock, PolymatrixGame, StrategyProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockDocument {
    pub i: usize,
    pub j: usize,
    pub rows: usize,
    pub cols: usize,
    #[serde(with = "format::reals")]
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameDocument {
    pub dims: Vec<usize>,
    pub class: GameClass,
    pub blocks: Vec<BlockDocument>,
    #[serde(with = "format::reals")]
    pub costs: Vec<f64>,
}

impl From<&PolymatrixGame> for GameDocument {
    fn from(game: &PolymatrixGame) -> Self {
        let blocks = game
            .stored_blocks()
            .map(|b| BlockDocument {
                i: b.i,
                j: b.j,
                rows: b.payoff.nrows(),
                cols: b.payoff.ncols(),
                data: b.payoff.transpose().as_slice().to_vec(),
            })
            .collect();
        Self {
            dims: game.partition().dims().to_vec(),
            class: game.class(),
            blocks,
            costs: game.costs().as_slice().to_vec(),
        }
    }
}

impl TryFrom<GameDocument> for PolymatrixGame {
    type Error = Error;

    fn try_from(doc: GameDocument) -> Result<Self> {
        let partition = AgentPartition::new(doc.dims)?;
        let mut blocks = Vec::with_capacity(doc.blocks.len());
        for b in doc.blocks {
            if b.data.len() != b.rows * b.cols {
                return Err(Error::InvalidGame(format!(
                    "block ({},{}) declares {}x{} but holds {} values",
                    b.i,
                    b.j,
                    b.rows,
                    b.cols,
                    b.data.len()
                )));
            }
            if b.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidGame(format!("block ({},{}) has a non-finite entry", b.i, b.j)));
            }
            blocks.push(InteractionBlock::new(b.i, b.j, DMatrix::from_row_slice(b.rows, b.cols, &b.data)));
        }
        if doc.costs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGame("non-finite cost".into()));
        }
        PolymatrixGame::new(partition, doc.class, blocks, doc.costs)
    }
}

pub fn game_to_json(game: &PolymatrixGame) -> String {
    serde_json::to_string_pretty(&GameDocument::from(game)).expect("game documents always serialize")
}

pub fn game_from_json(text: &str) -> Result<PolymatrixGame> {
    let doc: GameDocument = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    doc.try_into()
}

pub fn read_game(path: &Path) -> Result<PolymatrixGame> {
    let text = fs::read_to_string(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    game_from_json(&text)
}

pub fn write_game(path: &Path, game: &PolymatrixGame) -> Result<()> {
    fs::write(path, game_to_json(game) + "\n").map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

#[derive(Serialize, Deserialize)]
struct ProfileDocument {
    #[serde(with = "format::reals")]
    x: Vec<f64>,
}

/// `{"x": [...]}`, or a bare array when reading.
pub fn profile_to_json(x: &StrategyProfile) -> String {
    serde_json::to_string(&ProfileDocument { x: x.as_slice().to_vec() }).expect("profiles always serialize")
}

pub fn profile_from_json(text: &str) -> Result<StrategyProfile> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Either {
        Doc(ProfileDocument),
        Bare(#[serde(with = "format::reals")] Vec<f64>),
    }
    let v = match serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))? {
        Either::Doc(d) => d.x,
        Either::Bare(v) => v,
    };
    Ok(StrategyProfile::from(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    const PENNIES: &str = r#"{"dims": [2, 2], "class": "zero-sum",
        "blocks": [{"i": 0, "j": 1, "rows": 2, "cols": 2, "data": [1, -1, -1, 1]}],
        "costs": [0, 0, 0, 0]}"#;

    #[test]
    fn reads_row_major_blocks() {
        let g = game_from_json(PENNIES).unwrap();
        let a = g.consolidate();
        assert_eq!(a[(0, 2)], 1.0);
        assert_eq!(a[(0, 3)], -1.0);
        assert_eq!(a[(3, 0)], 1.0);
        assert_eq!(a[(2, 1)], 1.0);
    }

    #[test]
    fn writes_seventeen_digits() {
        let g = game_from_json(PENNIES).unwrap().with_costs(vec![0.1, 0.0, 0.0, 0.0]).unwrap();
        let text = game_to_json(&g);
        assert!(text.contains("1.0000000000000001e-1"), "{text}");
        assert_eq!(game_from_json(&text).unwrap(), g);
    }

    #[test]
    fn rejects_bad_documents() {
        let lower = PENNIES.replace(r#""i": 0, "j": 1"#, r#""i": 1, "j": 0"#);
        assert!(game_from_json(&lower).is_err());
        let short = PENNIES.replace("[1, -1, -1, 1]", "[1, -1, -1]");
        assert!(game_from_json(&short).is_err());
        let costs = PENNIES.replace("[0, 0, 0, 0]", "[0, 0, 0]");
        assert!(game_from_json(&costs).is_err());
        let unknown = PENNIES.replace(r#""class""#, r#""extra": 1, "class""#);
        assert!(game_from_json(&unknown).is_err());
        assert!(game_from_json("{").is_err());
    }

    #[test]
    fn profiles_accept_both_forms() {
        let x = StrategyProfile::from_slice(&[0.5, -1.25]);
        assert_eq!(profile_from_json(&profile_to_json(&x)).unwrap(), x);
        assert_eq!(profile_from_json("[0.5, -1.25]").unwrap(), x);
    }
}
