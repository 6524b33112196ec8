use serde::{Deserialize, Serialize};

use super::error::DataError;
use super::types::{CellHistory, DatasetSplit};

/// Metadata key holding a cell's test-condition group.
pub const CONDITION_KEY: &str = "condition";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitPolicy {
    /// Within each condition group, the first `n` cells (input order) train.
    FirstNTrain(usize),
    /// Cells whose id ends in an odd number train.
    OddEven,
}

fn trailing_number(id: &str) -> Option<u64> {
    let digits: String = id.chars().rev().take_while(|c| c.is_ascii_digit()).collect();
    if digits.is_empty() {
        return None;
    }
    digits.chars().rev().collect::<String>().parse().ok()
}

pub fn split_by_policy(cells: Vec<CellHistory>, policy: SplitPolicy) -> Result<DatasetSplit, DataError> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    match policy {
        SplitPolicy::FirstNTrain(n) => {
            // groups keep first-appearance order
            let mut groups: Vec<(String, Vec<CellHistory>)> = Vec::new();
            for cell in cells {
                let label = cell
                    .metadata
                    .get(CONDITION_KEY)
                    .cloned()
                    .ok_or_else(|| DataError::MissingCondition(cell.cell_id.clone()))?;
                match groups.iter_mut().find(|(g, _)| *g == label) {
                    Some((_, members)) => members.push(cell),
                    None => groups.push((label, vec![cell])),
                }
            }
            for (group, members) in groups {
                if members.len() <= n {
                    return Err(DataError::GroupTooSmall { group, size: members.len(), n });
                }
                for (i, cell) in members.into_iter().enumerate() {
                    if i < n {
                        train.push(cell);
                    } else {
                        test.push(cell);
                    }
                }
            }
        }
        SplitPolicy::OddEven => {
            for cell in cells {
                let k = trailing_number(&cell.cell_id).ok_or_else(|| DataError::UnnumberedCell(cell.cell_id.clone()))?;
                if k % 2 == 1 {
                    train.push(cell);
                } else {
                    test.push(cell);
                }
            }
        }
    }
    Ok(DatasetSplit { train, test })
}
