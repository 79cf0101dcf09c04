use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// PASCAL VOC foreground categories; class id = index + 1 (0 is background).
pub const PASCAL_CLASSES: [&str; 20] = [
    "aeroplane",
    "bicycle",
    "bird",
    "boat",
    "bottle",
    "bus",
    "car",
    "cat",
    "chair",
    "cow",
    "diningtable",
    "dog",
    "horse",
    "motorbike",
    "person",
    "pottedplant",
    "sheep",
    "sofa",
    "train",
    "tvmonitor",
];

/// COCO foreground categories in the usual contiguous order; class id = index + 1.
pub const COCO_CLASSES: [&str; 80] = [
    "person",
    "bicycle",
    "car",
    "motorbike",
    "aeroplane",
    "bus",
    "train",
    "truck",
    "boat",
    "trafficlight",
    "firehydrant",
    "stopsign",
    "parkingmeter",
    "bench",
    "bird",
    "cat",
    "dog",
    "horse",
    "sheep",
    "cow",
    "elephant",
    "bear",
    "zebra",
    "giraffe",
    "backpack",
    "umbrella",
    "handbag",
    "tie",
    "suitcase",
    "frisbee",
    "skis",
    "snowboard",
    "sportsball",
    "kite",
    "baseballbat",
    "baseballglove",
    "skateboard",
    "surfboard",
    "tennisracket",
    "bottle",
    "wineglass",
    "cup",
    "fork",
    "knife",
    "spoon",
    "bowl",
    "banana",
    "apple",
    "sandwich",
    "orange",
    "broccoli",
    "carrot",
    "hotdog",
    "pizza",
    "donut",
    "cake",
    "chair",
    "sofa",
    "pottedplant",
    "bed",
    "diningtable",
    "toilet",
    "tvmonitor",
    "laptop",
    "mouse",
    "remote",
    "keyboard",
    "cellphone",
    "microwave",
    "oven",
    "toaster",
    "sink",
    "refrigerator",
    "book",
    "clock",
    "vase",
    "scissors",
    "teddybear",
    "hairdrier",
    "toothbrush",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    Pascal5i,
    Coco20i,
    /// Synthetic or user-defined label space with `classes` foreground ids.
    Custom { classes: u32 },
}

impl Dataset {
    /// Number of foreground classes (ids `1..=n`).
    pub fn class_count(self) -> u32 {
        match self {
            Dataset::Pascal5i => 20,
            Dataset::Coco20i => 80,
            Dataset::Custom { classes } => classes,
        }
    }

    pub fn class_name(self, id: u32) -> Option<&'static str> {
        let idx = id.checked_sub(1)? as usize;
        match self {
            Dataset::Pascal5i => PASCAL_CLASSES.get(idx).copied(),
            Dataset::Coco20i => COCO_CLASSES.get(idx).copied(),
            Dataset::Custom { .. } => None,
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dataset::Pascal5i => f.write_str("pascal5i"),
            Dataset::Coco20i => f.write_str("coco20i"),
            Dataset::Custom { classes } => write!(f, "custom{classes}"),
        }
    }
}

impl FromStr for Dataset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pascal5i" => Ok(Dataset::Pascal5i),
            "coco20i" => Ok(Dataset::Coco20i),
            _ => s
                .strip_prefix("custom")
                .and_then(|n| n.parse().ok())
                .filter(|&n: &u32| n >= 1)
                .map(|classes| Dataset::Custom { classes })
                .ok_or_else(|| Error::InvalidValue(format!("unknown dataset `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FoldScheme {
    #[default]
    Sequential,
    Interleaved,
}

impl fmt::Display for FoldScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FoldScheme::Sequential => "sequential",
            FoldScheme::Interleaved => "interleaved",
        })
    }
}

impl FromStr for FoldScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequential" => Ok(FoldScheme::Sequential),
            "interleaved" => Ok(FoldScheme::Interleaved),
            _ => Err(Error::InvalidValue(format!("unknown fold scheme `{s}`"))),
        }
    }
}

/// Seen/unseen split of a dataset's foreground classes for one target fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub dataset: Dataset,
    pub fold: u32,
    pub scheme: FoldScheme,
    pub seen: Vec<u32>,
    pub unseen: Vec<u32>,
}

impl FoldSpec {
    /// Split of a custom label space with an explicit unseen list.
    pub fn custom(classes: u32, unseen: Vec<u32>) -> Result<Self> {
        let mut unseen = unseen;
        unseen.sort_unstable();
        unseen.dedup();
        if let Some(&bad) = unseen.iter().find(|&&c| c == 0 || c > classes) {
            return Err(Error::InvalidValue(format!(
                "unseen class {bad} outside 1..={classes}"
            )));
        }
        let seen = (1..=classes).filter(|c| !unseen.contains(c)).collect();
        Ok(Self {
            dataset: Dataset::Custom { classes },
            fold: 0,
            scheme: FoldScheme::Sequential,
            seen,
            unseen,
        })
    }

    pub fn class_count(&self) -> u32 {
        self.dataset.class_count()
    }

    pub fn is_unseen(&self, class: u32) -> bool {
        self.unseen.binary_search(&class).is_ok()
    }
}

pub fn fold_classes(dataset: Dataset, fold: u32, scheme: FoldScheme) -> Result<FoldSpec> {
    if fold > 3 {
        return Err(Error::BadFold(fold));
    }
    let total = dataset.class_count();
    let unseen: Vec<u32> = match (dataset, scheme) {
        (Dataset::Pascal5i, _) => (5 * fold + 1..=5 * fold + 5).collect(),
        (Dataset::Coco20i, FoldScheme::Sequential) => (20 * fold + 1..=20 * fold + 20).collect(),
        (Dataset::Coco20i, FoldScheme::Interleaved) => (0..20).map(|j| 4 * j + fold + 1).collect(),
        (Dataset::Custom { .. }, _) => {
            return Err(Error::InvalidValue(
                "custom datasets take an explicit unseen list".into(),
            ))
        }
    };
    let seen = (1..=total).filter(|c| !unseen.contains(c)).collect();
    Ok(FoldSpec {
        dataset,
        fold,
        scheme,
        seen,
        unseen,
    })
}
