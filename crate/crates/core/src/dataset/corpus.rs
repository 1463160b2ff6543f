use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::hierarchy::{parse_hierarchy, ViewElement};
use super::screen::{ScreenRecord, DEFAULT_NAV_BAR_FRACTION, DEFAULT_STATUS_BAR_FRACTION};
use super::{io_err, DatasetError};

pub const CORPUS_FORMAT_VERSION: u32 = 1;

const META_FILE: &str = "corpus.json";
const EXAMPLES_FILE: &str = "examples.jsonl";
const RATINGS_FILE: &str = "ratings.jsonl";
const SCREENS_DIR: &str = "screens";

/// One human judgment of one element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub screen_id: String,
    pub element_id: String,
    /// 1 = perceived tappable, 0 = not tappable.
    pub human_label: u8,
    pub clickable: u8,
    pub worker_id: String,
}

/// One line of a rating file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub screen_id: String,
    pub element_id: String,
    pub worker_id: String,
    pub label: u8,
}

/// All ratings of one element, one per distinct worker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingSet {
    pub screen_id: String,
    pub element_id: String,
    pub ratings: Vec<u8>,
}

impl RatingSet {
    pub fn tappable_votes(&self) -> usize {
        self.ratings.iter().filter(|&&r| r == 1).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusMeta {
    pub format_version: u32,
    #[serde(default)]
    pub description: String,
    pub status_bar_fraction: f64,
    pub nav_bar_fraction: f64,
    /// Free-form generator metadata (the planted rule for synthetic corpora).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<serde_json::Value>,
}

impl Default for CorpusMeta {
    fn default() -> Self {
        Self {
            format_version: CORPUS_FORMAT_VERSION,
            description: String::new(),
            status_bar_fraction: DEFAULT_STATUS_BAR_FRACTION,
            nav_bar_fraction: DEFAULT_NAV_BAR_FRACTION,
            generator: None,
        }
    }
}

/// Screens plus the labels and ratings that refer to them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub meta: CorpusMeta,
    pub screens: BTreeMap<String, ScreenRecord>,
    pub examples: Vec<LabeledExample>,
    pub ratings: Vec<RatingRecord>,
}

fn valid_screen_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) && !id.starts_with('.')
}

impl Corpus {
    pub fn new(meta: CorpusMeta) -> Self {
        Self {
            meta,
            ..Self::default()
        }
    }

    pub fn add_screen(&mut self, screen: ScreenRecord) -> Result<(), DatasetError> {
        if !valid_screen_id(&screen.screen_id) {
            return Err(DatasetError::InvalidScreen {
                screen_id: screen.screen_id,
                reason: "screen ids may only contain ASCII letters, digits, '-', '_' and '.'".into(),
            });
        }
        self.screens.insert(screen.screen_id.clone(), screen);
        Ok(())
    }

    pub fn add_example(&mut self, example: LabeledExample) -> Result<(), DatasetError> {
        self.check_reference(&example.screen_id, &example.element_id)?;
        if example.human_label > 1 || example.clickable > 1 {
            return Err(DatasetError::InvalidArgument("labels must be 0 or 1".into()));
        }
        self.examples.push(example);
        Ok(())
    }

    pub fn add_rating(&mut self, rating: RatingRecord) -> Result<(), DatasetError> {
        self.check_reference(&rating.screen_id, &rating.element_id)?;
        if rating.label > 1 {
            return Err(DatasetError::InvalidArgument("labels must be 0 or 1".into()));
        }
        self.ratings.push(rating);
        Ok(())
    }

    fn check_reference(&self, screen_id: &str, element_id: &str) -> Result<(), DatasetError> {
        self.lookup(screen_id, element_id)
            .map(|_| ())
            .ok_or_else(|| DatasetError::DanglingReference {
                screen_id: screen_id.to_string(),
                element_id: element_id.to_string(),
            })
    }

    pub fn lookup(&self, screen_id: &str, element_id: &str) -> Option<(&ScreenRecord, &ViewElement)> {
        let screen = self.screens.get(screen_id)?;
        let element = screen.element(element_id)?;
        Some((screen, element))
    }

    /// Example paired with its screen and element.
    pub fn resolve<'a>(&'a self, example: &LabeledExample) -> (&'a ScreenRecord, &'a ViewElement) {
        self.lookup(&example.screen_id, &example.element_id)
            .expect("examples are validated on insertion")
    }

    /// Ratings grouped per element, in order of first appearance.
    pub fn rating_sets(&self) -> Result<Vec<RatingSet>, DatasetError> {
        let mut order: Vec<(String, String)> = Vec::new();
        let mut groups: BTreeMap<(String, String), (Vec<u8>, Vec<String>)> = BTreeMap::new();
        for r in &self.ratings {
            let key = (r.screen_id.clone(), r.element_id.clone());
            let entry = groups.entry(key.clone()).or_insert_with(|| {
                order.push(key);
                (Vec::new(), Vec::new())
            });
            if entry.1.contains(&r.worker_id) {
                return Err(DatasetError::InvalidArgument(format!(
                    "worker {} rated {}/{} twice",
                    r.worker_id, r.screen_id, r.element_id
                )));
            }
            entry.0.push(r.label);
            entry.1.push(r.worker_id.clone());
        }
        Ok(order
            .into_iter()
            .map(|key| {
                let ratings = groups.remove(&key).map(|g| g.0).unwrap_or_default();
                RatingSet {
                    screen_id: key.0,
                    element_id: key.1,
                    ratings,
                }
            })
            .collect())
    }

    /// Writes `corpus.json`, `examples.jsonl`, `ratings.jsonl` and one PNG plus
    /// one hierarchy JSON per screen under `screens/`.
    pub fn save(&self, dir: &Path) -> Result<(), DatasetError> {
        let screens_dir = dir.join(SCREENS_DIR);
        fs::create_dir_all(&screens_dir).map_err(io_err(&screens_dir))?;
        let meta = serde_json::to_string_pretty(&self.meta).expect("meta serializes");
        write_file(&dir.join(META_FILE), meta.as_bytes())?;
        write_jsonl(&dir.join(EXAMPLES_FILE), &self.examples)?;
        write_jsonl(&dir.join(RATINGS_FILE), &self.ratings)?;
        for (id, screen) in &self.screens {
            let png = screens_dir.join(format!("{id}.png"));
            screen.screenshot.save(&png).map_err(|e| DatasetError::Image {
                path: png.clone(),
                reason: e.to_string(),
            })?;
            let json = serde_json::to_string(&screen.root).expect("hierarchy serializes");
            write_file(&screens_dir.join(format!("{id}.json")), json.as_bytes())?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, DatasetError> {
        let meta_path = dir.join(META_FILE);
        let meta_text = fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
        let meta: CorpusMeta = serde_json::from_str(&meta_text).map_err(|e| DatasetError::CorruptRecord {
            file: META_FILE.into(),
            line: e.line(),
            reason: e.to_string(),
        })?;
        if meta.format_version != CORPUS_FORMAT_VERSION {
            return Err(DatasetError::VersionMismatch {
                found: meta.format_version,
                expected: CORPUS_FORMAT_VERSION,
            });
        }
        let examples: Vec<LabeledExample> = read_jsonl(&dir.join(EXAMPLES_FILE), EXAMPLES_FILE, true)?;
        let ratings: Vec<RatingRecord> = read_jsonl(&dir.join(RATINGS_FILE), RATINGS_FILE, false)?;

        let mut corpus = Corpus::new(meta);
        let screen_ids: std::collections::BTreeSet<&str> = examples
            .iter()
            .map(|e| e.screen_id.as_str())
            .chain(ratings.iter().map(|r| r.screen_id.as_str()))
            .collect();
        // Screens present on disk but unreferenced are loaded too.
        let mut all_ids: std::collections::BTreeSet<String> = screen_ids.iter().map(|s| s.to_string()).collect();
        let screens_dir = dir.join(SCREENS_DIR);
        if let Ok(entries) = fs::read_dir(&screens_dir) {
            for entry in entries.flatten() {
                let name = entry.file_name().to_string_lossy().to_string();
                if let Some(stem) = name.strip_suffix(".json") {
                    all_ids.insert(stem.to_string());
                }
            }
        }
        for id in all_ids {
            let screen = load_screen(&screens_dir, &id, &corpus.meta)?;
            corpus.add_screen(screen)?;
        }
        for (i, e) in examples.into_iter().enumerate() {
            corpus.add_example(e).map_err(|err| DatasetError::CorruptRecord {
                file: EXAMPLES_FILE.into(),
                line: i + 1,
                reason: err.to_string(),
            })?;
        }
        for (i, r) in ratings.into_iter().enumerate() {
            corpus.add_rating(r).map_err(|err| DatasetError::CorruptRecord {
                file: RATINGS_FILE.into(),
                line: i + 1,
                reason: err.to_string(),
            })?;
        }
        Ok(corpus)
    }
}

/// Reads a screenshot and its hierarchy from `dir/<id>.png` and `dir/<id>.json`.
pub(crate) fn load_screen(dir: &Path, id: &str, meta: &CorpusMeta) -> Result<ScreenRecord, DatasetError> {
    let png = dir.join(format!("{id}.png"));
    let json = dir.join(format!("{id}.json"));
    read_screen(id, &png, &json, meta.status_bar_fraction, meta.nav_bar_fraction)
}

fn read_screen(id: &str, png: &Path, json: &Path, top: f64, bottom: f64) -> Result<ScreenRecord, DatasetError> {
    for p in [png, json] {
        if !p.exists() {
            return Err(DatasetError::MissingAsset { path: p.to_path_buf() });
        }
    }
    let image = image::open(png)
        .map_err(|e| DatasetError::Image {
            path: png.to_path_buf(),
            reason: e.to_string(),
        })?
        .to_rgb8();
    let doc = fs::read_to_string(json).map_err(io_err(json))?;
    let parsed = parse_hierarchy(&doc)?;
    ScreenRecord::with_zone_fractions(id, image, parsed.root, top, bottom)
}

impl ScreenRecord {
    /// Loads a screenshot file and a hierarchy document, using the default
    /// status and navigation bar zones.
    pub fn from_files(id: impl Into<String>, screenshot: &Path, hierarchy: &Path) -> Result<Self, DatasetError> {
        read_screen(&id.into(), screenshot, hierarchy, DEFAULT_STATUS_BAR_FRACTION, DEFAULT_NAV_BAR_FRACTION)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    fs::write(path, bytes).map_err(io_err(path))
}

fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), DatasetError> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).expect("record serializes");
        out.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(&out).map_err(io_err(path))
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path, name: &str, required: bool) -> Result<Vec<T>, DatasetError> {
    let file = match fs::File::open(path) {
        Ok(f) => f,
        Err(e) if !required && e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(DatasetError::Io { path: path.into(), source: e }),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| DatasetError::CorruptRecord {
            file: name.to_string(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}
