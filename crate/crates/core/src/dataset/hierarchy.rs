//! View-hierarchy documents (Rico-style JSON trees).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::DatasetError;

/// Axis-aligned rectangle in hierarchy coordinates, serialized as
/// `[left, top, right, bottom]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[i32; 4]", into = "[i32; 4]")]
pub struct PixelRect {
    pub left: i32,
    pub top: i32,
    pub right: i32,
    pub bottom: i32,
}

impl From<[i32; 4]> for PixelRect {
    fn from([left, top, right, bottom]: [i32; 4]) -> Self {
        Self { left, top, right, bottom }
    }
}

impl From<PixelRect> for [i32; 4] {
    fn from(r: PixelRect) -> Self {
        [r.left, r.top, r.right, r.bottom]
    }
}

impl PixelRect {
    pub fn new(left: i32, top: i32, right: i32, bottom: i32) -> Self {
        Self { left, top, right, bottom }
    }

    /// Rectangle given by origin and size.
    pub fn from_xywh(x: i32, y: i32, w: i32, h: i32) -> Self {
        Self::new(x, y, x + w, y + h)
    }

    pub fn width(&self) -> i32 {
        self.right - self.left
    }

    pub fn height(&self) -> i32 {
        self.bottom - self.top
    }

    pub fn is_empty(&self) -> bool {
        self.width() <= 0 || self.height() <= 0
    }

    pub fn area(&self) -> i64 {
        if self.is_empty() {
            0
        } else {
            i64::from(self.width()) * i64::from(self.height())
        }
    }

    pub fn intersection(&self, other: &PixelRect) -> PixelRect {
        PixelRect::new(
            self.left.max(other.left),
            self.top.max(other.top),
            self.right.min(other.right),
            self.bottom.min(other.bottom),
        )
    }

    /// True when the two rectangles share a region of positive area.
    pub fn intersects(&self, other: &PixelRect) -> bool {
        !self.intersection(other).is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewElement {
    pub id: String,
    #[serde(rename = "class")]
    pub class_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    pub bounds: PixelRect,
    pub clickable: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<ViewElement>,
}

impl ViewElement {
    /// Class name without its package prefix (`android.widget.Button` -> `Button`).
    pub fn simple_class_name(&self) -> &str {
        simple_class_name(&self.class_name)
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Pre-order traversal.
    pub fn walk(&self) -> Vec<&ViewElement> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(e) = stack.pop() {
            out.push(e);
            stack.extend(e.children.iter().rev());
        }
        out
    }

    pub fn find(&self, id: &str) -> Option<&ViewElement> {
        self.walk().into_iter().find(|e| e.id == id)
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(ViewElement::depth).max().unwrap_or(0)
    }
}

pub fn simple_class_name(class_name: &str) -> &str {
    class_name.rsplit(['.', '$']).next().unwrap_or(class_name)
}

/// Result of parsing one hierarchy document.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedHierarchy {
    pub root: ViewElement,
    pub warnings: Vec<String>,
}

/// Parses a Rico-style document: either `{"activity": {"root": node}}` or a
/// bare node. Each node needs `class` and `bounds`; `clickable` defaults to
/// false. Nodes with empty or inverted bounds, or that do not overlap their
/// parent, are dropped together with their subtree.
pub fn parse_hierarchy(document: &str) -> Result<ParsedHierarchy, DatasetError> {
    let value: Value = serde_json::from_str(document).map_err(|e| DatasetError::Parse {
        path: "$".into(),
        reason: e.to_string(),
    })?;
    let root_value = match value.get("activity").and_then(|a| a.get("root")) {
        Some(r) => r,
        None => &value,
    };
    let mut warnings = Vec::new();
    let root = parse_node(root_value, "root", None, &mut warnings)?.ok_or_else(|| DatasetError::Parse {
        path: "root".into(),
        reason: "root node has empty or inverted bounds".into(),
    })?;
    let mut root = root;
    assign_missing_ids(&mut root);
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(ParsedHierarchy { root, warnings })
}

fn field<'a>(obj: &'a Map<String, Value>, path: &str, key: &str) -> Result<&'a Value, DatasetError> {
    obj.get(key).ok_or_else(|| DatasetError::Parse {
        path: path.to_string(),
        reason: format!("missing `{key}`"),
    })
}

fn parse_node(
    value: &Value,
    path: &str,
    parent: Option<&PixelRect>,
    warnings: &mut Vec<String>,
) -> Result<Option<ViewElement>, DatasetError> {
    let err = |reason: String| DatasetError::Parse {
        path: path.to_string(),
        reason,
    };
    let obj = value.as_object().ok_or_else(|| err("node is not an object".into()))?;
    let class_name = field(obj, path, "class")?
        .as_str()
        .ok_or_else(|| err("`class` is not a string".into()))?
        .to_string();
    let bounds = field(obj, path, "bounds")?;
    let coords: Vec<i64> = bounds
        .as_array()
        .filter(|a| a.len() == 4)
        .and_then(|a| a.iter().map(Value::as_i64).collect::<Option<Vec<_>>>())
        .ok_or_else(|| err(format!("`bounds` must be four integers, got {bounds}")))?;
    let clamp = |v: i64| v.clamp(i64::from(i32::MIN), i64::from(i32::MAX)) as i32;
    let bounds = PixelRect::new(clamp(coords[0]), clamp(coords[1]), clamp(coords[2]), clamp(coords[3]));
    if bounds.is_empty() {
        warnings.push(format!("{path}: dropped node with empty or inverted bounds {:?}", <[i32; 4]>::from(bounds)));
        return Ok(None);
    }
    if let Some(p) = parent {
        if !bounds.intersects(p) {
            warnings.push(format!("{path}: dropped node lying outside its parent"));
            return Ok(None);
        }
    }
    let clickable = match obj.get("clickable") {
        Some(Value::Bool(b)) => *b,
        Some(Value::Null) | None => {
            warnings.push(format!("{path}: missing `clickable`, defaulting to false"));
            false
        }
        Some(other) => return Err(err(format!("`clickable` must be a boolean, got {other}"))),
    };
    let text = match obj.get("text") {
        Some(Value::String(s)) if !s.is_empty() => Some(s.clone()),
        Some(Value::String(_)) | Some(Value::Null) | None => None,
        Some(other) => return Err(err(format!("`text` must be a string, got {other}"))),
    };
    let id = match obj.get("id") {
        Some(Value::String(s)) => s.clone(),
        _ => String::new(),
    };
    let mut children = Vec::new();
    match obj.get("children") {
        None | Some(Value::Null) => {}
        Some(Value::Array(items)) => {
            for (i, child) in items.iter().enumerate() {
                if child.is_null() {
                    continue;
                }
                let child_path = format!("{path}/children[{i}]");
                if let Some(c) = parse_node(child, &child_path, Some(&bounds), warnings)? {
                    children.push(c);
                }
            }
        }
        Some(other) => return Err(err(format!("`children` must be an array, got {other}"))),
    }
    Ok(Some(ViewElement {
        id,
        class_name,
        text,
        bounds,
        clickable,
        children,
    }))
}

/// Nodes without an explicit id get one derived from class and bounds, which
/// keeps ids stable when siblings are reordered. Exact duplicates receive a
/// `#n` suffix in document order.
fn assign_missing_ids(root: &mut ViewElement) {
    let mut seen: HashMap<String, usize> = HashMap::new();
    for e in root.walk() {
        if !e.id.is_empty() {
            seen.insert(e.id.clone(), 1);
        }
    }
    fn visit(e: &mut ViewElement, seen: &mut HashMap<String, usize>) {
        if e.id.is_empty() {
            let b = e.bounds;
            let base = format!("{}@{},{},{},{}", simple_class_name(&e.class_name), b.left, b.top, b.right, b.bottom);
            let n = seen.entry(base.clone()).or_insert(0);
            *n += 1;
            e.id = if *n == 1 { base } else { format!("{base}#{n}") };
        }
        for c in &mut e.children {
            visit(c, seen);
        }
    }
    visit(root, &mut seen);
}
