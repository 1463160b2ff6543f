use serde::{Deserialize, Serialize};

use super::hierarchy::ViewElement;
use super::screen::ScreenRecord;
use crate::rng::RngStream;

/// Per-screen caps on the number of selected elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionCaps {
    pub clickable: usize,
    pub non_clickable: usize,
}

impl Default for SelectionCaps {
    fn default() -> Self {
        Self {
            clickable: 5,
            non_clickable: 5,
        }
    }
}

/// Picks the elements a rater would be asked to label.
///
/// Clickable candidates are the top-most clickable node on every
/// leaf-to-root path; nothing inside a clickable subtree is ever a
/// candidate. Non-clickable candidates are leaves outside every clickable
/// subtree. The root and anything touching an excluded zone are skipped.
/// Each candidate list is sorted by id before seeded sampling, and the result
/// is returned in document order.
pub fn select_elements<'a>(screen: &'a ScreenRecord, caps: &SelectionCaps, rng: &mut RngStream) -> Vec<&'a ViewElement> {
    let mut clickable: Vec<(usize, &ViewElement)> = Vec::new();
    let mut plain: Vec<(usize, &ViewElement)> = Vec::new();
    let mut order = 0usize;
    collect(screen, &screen.root, true, &mut order, &mut clickable, &mut plain);

    let mut pick = |mut cands: Vec<(usize, &'a ViewElement)>, cap: usize| {
        cands.sort_by(|a, b| a.1.id.cmp(&b.1.id));
        rng.sample_indices(cands.len(), cap)
            .into_iter()
            .map(|i| cands[i])
            .collect::<Vec<_>>()
    };
    let mut chosen = pick(clickable, caps.clickable);
    chosen.extend(pick(plain, caps.non_clickable));
    chosen.sort_by_key(|(pos, _)| *pos);
    chosen.into_iter().map(|(_, e)| e).collect()
}

fn collect<'a>(
    screen: &ScreenRecord,
    node: &'a ViewElement,
    is_root: bool,
    order: &mut usize,
    clickable: &mut Vec<(usize, &'a ViewElement)>,
    plain: &mut Vec<(usize, &'a ViewElement)>,
) {
    let pos = *order;
    *order += 1;
    if node.clickable {
        if !is_root && !screen.in_excluded_zone(&node.bounds) {
            clickable.push((pos, node));
        }
        // Descendants of a clickable node are never candidates.
        return;
    }
    if node.is_leaf() {
        if !is_root && !screen.in_excluded_zone(&node.bounds) {
            plain.push((pos, node));
        }
        return;
    }
    for c in &node.children {
        collect(screen, c, false, order, clickable, plain);
    }
}
