use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Opinion category of a hashtag or a tweet.
///
/// Hashtags only ever carry the four base labels; the `Support*`, `Mixed`
/// and `Unidentified` values arise when tweets are labeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpinionLabel {
    ProClinton,
    AntiTrump,
    SupportClinton,
    ProTrump,
    AntiClinton,
    SupportTrump,
    Mixed,
    Unidentified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Clinton,
    Trump,
}

impl OpinionLabel {
    /// The six categories allowed in a training set, in category-index order.
    pub const TRAINING: [OpinionLabel; 6] = [
        OpinionLabel::ProClinton,
        OpinionLabel::AntiTrump,
        OpinionLabel::SupportClinton,
        OpinionLabel::ProTrump,
        OpinionLabel::AntiClinton,
        OpinionLabel::SupportTrump,
    ];

    pub const ALL: [OpinionLabel; 8] = [
        OpinionLabel::ProClinton,
        OpinionLabel::AntiTrump,
        OpinionLabel::SupportClinton,
        OpinionLabel::ProTrump,
        OpinionLabel::AntiClinton,
        OpinionLabel::SupportTrump,
        OpinionLabel::Mixed,
        OpinionLabel::Unidentified,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OpinionLabel::ProClinton => "pro-clinton",
            OpinionLabel::AntiTrump => "anti-trump",
            OpinionLabel::SupportClinton => "support-clinton",
            OpinionLabel::ProTrump => "pro-trump",
            OpinionLabel::AntiClinton => "anti-clinton",
            OpinionLabel::SupportTrump => "support-trump",
            OpinionLabel::Mixed => "mixed",
            OpinionLabel::Unidentified => "unidentified",
        }
    }

    pub fn is_training(self) -> bool {
        !matches!(self, OpinionLabel::Mixed | OpinionLabel::Unidentified)
    }

    /// 1-based category index among the six training categories.
    pub fn category(self) -> Option<usize> {
        Self::TRAINING.iter().position(|&l| l == self).map(|p| p + 1)
    }

    pub fn from_category(c: usize) -> Option<Self> {
        c.checked_sub(1).and_then(|i| Self::TRAINING.get(i).copied())
    }

    pub fn side(self) -> Option<Side> {
        match self {
            OpinionLabel::ProClinton | OpinionLabel::AntiTrump | OpinionLabel::SupportClinton => {
                Some(Side::Clinton)
            }
            OpinionLabel::ProTrump | OpinionLabel::AntiClinton | OpinionLabel::SupportTrump => {
                Some(Side::Trump)
            }
            _ => None,
        }
    }
}

impl fmt::Display for OpinionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OpinionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect();
        OpinionLabel::ALL
            .into_iter()
            .find(|l| l.as_str().replace('-', "") == norm)
            .ok_or_else(|| Error::Data(format!("unknown opinion label {s:?}")))
    }
}
