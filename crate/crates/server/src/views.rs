use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use legiscout_core::cluster::{ClusterTree, ViewGraph};
use legiscout_core::layout::LayoutState;
use legiscout_core::model::FilterSpec;

/// Id of the unfiltered view created with every dataset.
pub const MAIN_VIEW: &str = "main";

/// One client-visible view: a (possibly filtered, possibly collapsed) graph
/// and its layout.
#[derive(Debug, Clone)]
pub struct SessionView {
    pub id: String,
    pub view: ViewGraph,
    pub layout: LayoutState,
    pub filter: Option<FilterSpec>,
    pub tree: Arc<ClusterTree>,
}

struct Slot {
    view: Arc<Mutex<SessionView>>,
    last_used: u64,
}

/// Views keyed by id with least-recently-used eviction. The main view is
/// never evicted.
pub struct ViewStore {
    slots: HashMap<String, Slot>,
    capacity: usize,
    clock: u64,
    next_id: u64,
}

impl ViewStore {
    pub fn new(capacity: usize) -> Self {
        ViewStore {
            slots: HashMap::new(),
            capacity: capacity.max(1),
            clock: 0,
            next_id: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn fresh_id(&mut self) -> String {
        let id = format!("v{}", self.next_id);
        self.next_id += 1;
        id
    }

    pub fn insert(&mut self, view: SessionView) -> Arc<Mutex<SessionView>> {
        self.clock += 1;
        let id = view.id.clone();
        let shared = Arc::new(Mutex::new(view));
        self.slots.insert(
            id,
            Slot {
                view: shared.clone(),
                last_used: self.clock,
            },
        );
        while self.slots.len() > self.capacity {
            let victim = self
                .slots
                .iter()
                .filter(|(id, _)| id.as_str() != MAIN_VIEW)
                .min_by_key(|(_, s)| s.last_used)
                .map(|(id, _)| id.clone());
            match victim {
                Some(id) => {
                    log::debug!("evicting view {id}");
                    self.slots.remove(&id);
                }
                None => break,
            }
        }
        shared
    }

    /// Looks up a view and marks it as recently used.
    pub fn get(&mut self, id: &str) -> Option<Arc<Mutex<SessionView>>> {
        self.clock += 1;
        let clock = self.clock;
        self.slots.get_mut(id).map(|s| {
            s.last_used = clock;
            s.view.clone()
        })
    }

    /// Looks up a view without touching its recency.
    pub fn peek(&self, id: &str) -> Option<Arc<Mutex<SessionView>>> {
        self.slots.get(id).map(|s| s.view.clone())
    }

    pub fn all(&self) -> Vec<Arc<Mutex<SessionView>>> {
        self.slots.values().map(|s| s.view.clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use legiscout_core::layout::{init_layout, LayoutParams};
    use legiscout_core::model::LogGraph;

    fn view(id: &str) -> SessionView {
        let g = LogGraph::new();
        SessionView {
            id: id.into(),
            layout: init_layout(&g, &LayoutParams::default()).unwrap(),
            view: ViewGraph::new(g),
            filter: None,
            tree: Arc::new(ClusterTree::default()),
        }
    }

    #[test]
    fn evicts_least_recent_but_keeps_main() {
        let mut s = ViewStore::new(3);
        s.insert(view(MAIN_VIEW));
        s.insert(view("v1"));
        s.insert(view("v2"));
        s.get("v1");
        s.insert(view("v3"));
        assert!(s.peek("v2").is_none());
        assert!(s.peek("v1").is_some() && s.peek(MAIN_VIEW).is_some());
        s.get("v1");
        s.get("v3");
        s.insert(view("v4"));
        assert_eq!(s.len(), 3);
        assert!(s.peek(MAIN_VIEW).is_some());
    }
}
