use std::collections::HashMap;
use std::fmt;
use std::num::NonZeroU32;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{DomNode, DomSnapshot};
use crate::distill::InteractiveRules;

/// Injected element identifier. Always >= 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Mmid(NonZeroU32);

impl Mmid {
    pub fn new(value: u32) -> Option<Self> {
        NonZeroU32::new(value).map(Self)
    }

    pub fn get(self) -> u32 {
        self.0.get()
    }
}

impl TryFrom<u32> for Mmid {
    type Error = String;

    fn try_from(value: u32) -> Result<Self, Self::Error> {
        Mmid::new(value).ok_or_else(|| "mmid must be >= 1".to_string())
    }
}

impl From<Mmid> for u32 {
    fn from(m: Mmid) -> u32 {
        m.get()
    }
}

impl FromStr for Mmid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let v: u32 = s
            .trim()
            .parse()
            .map_err(|_| format!("not an mmid: {s:?}"))?;
        Mmid::try_from(v)
    }
}

impl fmt::Display for Mmid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MmidPolicy {
    #[default]
    InteractiveOnly,
    AllElements,
}

/// Identity of an element across re-snapshots of one page session.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct ElementKey {
    tag: String,
    /// Indices among element siblings only, so text edits do not shift it.
    structural_path: Vec<usize>,
    id: Option<String>,
    name: Option<String>,
}

/// Per-session mmid assignment state.
///
/// Elements whose (tag, structural path, id, name) survive between snapshots
/// keep their mmid; anything new is numbered above the high-water mark.
#[derive(Clone, Debug, Default)]
pub struct MmidAllocator {
    policy: MmidPolicy,
    rules: InteractiveRules,
    known: HashMap<ElementKey, Mmid>,
    high_water: u32,
}

impl MmidAllocator {
    pub fn new(policy: MmidPolicy) -> Self {
        Self {
            policy,
            ..Self::default()
        }
    }

    pub fn with_rules(policy: MmidPolicy, rules: InteractiveRules) -> Self {
        Self {
            policy,
            rules,
            ..Self::default()
        }
    }

    pub fn policy(&self) -> MmidPolicy {
        self.policy
    }

    pub fn high_water(&self) -> u32 {
        self.high_water
    }

    /// Forget everything; used on navigation.
    pub fn reset(&mut self) {
        self.known.clear();
        self.high_water = 0;
    }

    /// Seeds the allocator from mmids already present in `snapshot`.
    pub fn adopt(&mut self, snapshot: &DomSnapshot) {
        let mut path = Vec::new();
        adopt_walk(snapshot.root(), &mut path, &mut |key, mmid| {
            self.high_water = self.high_water.max(mmid.get());
            self.known.insert(key, mmid);
        });
    }

    pub fn assign(&mut self, mut snapshot: DomSnapshot) -> DomSnapshot {
        self.assign_tree(snapshot.root_mut());
        snapshot.reindex();
        snapshot
    }

    pub(crate) fn assign_tree(&mut self, root: &mut DomNode) {
        let mut path = Vec::new();
        self.assign_walk(root, &mut path);
    }

    fn assign_walk(&mut self, node: &mut DomNode, path: &mut Vec<usize>) {
        let eligible = match self.policy {
            MmidPolicy::AllElements => true,
            MmidPolicy::InteractiveOnly => self.rules.is_interactive(node),
        };
        if eligible {
            let key = key_for(node, path);
            let mmid = match self.known.get(&key) {
                Some(m) => *m,
                None => {
                    self.high_water += 1;
                    let m = Mmid::new(self.high_water).expect("high water starts at 1");
                    self.known.insert(key, m);
                    m
                }
            };
            node.set_mmid(Some(mmid));
        } else {
            node.set_mmid(None);
        }
        let mut element_idx = 0;
        for child in node.children_mut().iter_mut() {
            if child.is_element() {
                path.push(element_idx);
                self.assign_walk(child, path);
                path.pop();
                element_idx += 1;
            }
        }
    }
}

fn key_for(node: &DomNode, path: &[usize]) -> ElementKey {
    ElementKey {
        tag: node.tag().to_string(),
        structural_path: path.to_vec(),
        id: node.attr("id").map(str::to_string),
        name: node.attr("name").map(str::to_string),
    }
}

fn adopt_walk(node: &DomNode, path: &mut Vec<usize>, f: &mut impl FnMut(ElementKey, Mmid)) {
    if let Some(m) = node.mmid() {
        f(key_for(node, path), m);
    }
    for (i, child) in node.element_children().enumerate() {
        path.push(i);
        adopt_walk(child, path, f);
        path.pop();
    }
}

/// Element-only sibling indices from the root, e.g. `html/body[1]/div[0]`.
pub fn structural_locator(root: &DomNode, path: &super::NodePath) -> String {
    let mut out = root.tag().to_string();
    let mut node = root;
    for &i in &path.0 {
        let Some(child) = node.children().get(i) else {
            break;
        };
        if !child.is_element() {
            break;
        }
        let element_idx = node.children()[..i]
            .iter()
            .filter(|c| c.is_element())
            .count();
        out.push('/');
        out.push_str(child.tag());
        out.push_str(&format!("[{element_idx}]"));
        node = child;
    }
    out
}

/// Assigns mmids to a snapshot with no session history.
///
/// Mmids already present are kept, so re-running is a no-op.
pub fn assign_mmids(snapshot: DomSnapshot, policy: MmidPolicy) -> DomSnapshot {
    let mut alloc = MmidAllocator::new(policy);
    alloc.adopt(&snapshot);
    alloc.assign(snapshot)
}
