//! Minimal behavior-tree engine.
//!
//! Trees are plain data ([`BtNode`]) parsed from a Groot2-compatible XML
//! subset. Ticking is memoryless: every tick re-evaluates from the root, so
//! anything that must persist across ticks lives on the [`Blackboard`].

mod blackboard;
mod xml;

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

pub use blackboard::{Blackboard, ExplorationTarget};
pub use xml::{parse_bt_xml, serialize_bt_xml, DEFAULT_TREE_XML};

pub const LOCAL_SENSING: &str = "LocalSensingNode";
pub const DECISION_MAKING: &str = "DecisionMakingNode";
pub const TASK_EXECUTION: &str = "TaskExecutionNode";
pub const EXPLORATION: &str = "ExplorationNode";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeStatus {
    Success,
    Failure,
    Running,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Sequence,
    Fallback,
    Action(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BtNode {
    pub kind: NodeKind,
    pub children: Vec<BtNode>,
    pub display_name: String,
}

impl BtNode {
    pub fn sequence(children: Vec<BtNode>) -> Self {
        BtNode {
            kind: NodeKind::Sequence,
            children,
            display_name: "Sequence".into(),
        }
    }

    pub fn fallback(children: Vec<BtNode>) -> Self {
        BtNode {
            kind: NodeKind::Fallback,
            children,
            display_name: "Fallback".into(),
        }
    }

    pub fn action(name: &str) -> Self {
        BtNode {
            kind: NodeKind::Action(name.to_string()),
            children: Vec::new(),
            display_name: name.to_string(),
        }
    }

    /// The tree every agent runs unless configured otherwise.
    pub fn default_tree() -> Self {
        BtNode::sequence(vec![
            BtNode::action(LOCAL_SENSING),
            BtNode::fallback(vec![
                BtNode::sequence(vec![
                    BtNode::action(DECISION_MAKING),
                    BtNode::action(TASK_EXECUTION),
                ]),
                BtNode::action(EXPLORATION),
            ]),
        ])
    }

    pub fn tag(&self) -> &str {
        match &self.kind {
            NodeKind::Sequence => "Sequence",
            NodeKind::Fallback => "Fallback",
            NodeKind::Action(name) => name,
        }
    }

    /// Every action name referenced in the tree, in depth-first order.
    pub fn action_names(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_actions(&mut out);
        out
    }

    fn collect_actions<'a>(&'a self, out: &mut Vec<&'a str>) {
        match &self.kind {
            NodeKind::Action(name) => out.push(name),
            _ => self.children.iter().for_each(|c| c.collect_actions(out)),
        }
    }

    /// Structural invariants: actions are leaves, composites are not.
    pub fn check_arity(&self) -> Result<(), BtError> {
        match &self.kind {
            NodeKind::Action(name) if !self.children.is_empty() => {
                Err(BtError::ActionWithChildren(name.clone()))
            }
            NodeKind::Sequence | NodeKind::Fallback if self.children.is_empty() => {
                Err(BtError::EmptyTree(format!("`{}` has no children", self.tag())))
            }
            _ => self.children.iter().try_for_each(BtNode::check_arity),
        }
    }
}

impl fmt::Display for BtNode {
    /// Indented outline, one node per line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(n: &BtNode, depth: usize, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            writeln!(f, "{:indent$}{}", "", n.tag(), indent = depth * 2)?;
            n.children.iter().try_for_each(|c| go(c, depth + 1, f))
        }
        go(self, 0, f)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BtError {
    #[error("XML syntax error: {0}")]
    XmlSyntax(String),
    /// No `<BehaviorTree>` with exactly one root, or a composite without children.
    #[error("empty tree: {0}")]
    EmptyTree(String),
    #[error("action node `{0}` has children")]
    ActionWithChildren(String),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("action `{0}` is already registered")]
    DuplicateAction(String),
    #[error("action name must not be empty")]
    EmptyActionName,
}

pub type ActionHandler<C> = Box<dyn Fn(&mut C, &mut Blackboard) -> NodeStatus + Send + Sync>;

/// Name → handler table consulted by [`tick`].
pub struct ActionRegistry<C> {
    handlers: HashMap<String, ActionHandler<C>>,
}

impl<C> Default for ActionRegistry<C> {
    fn default() -> Self {
        ActionRegistry {
            handlers: HashMap::new(),
        }
    }
}

impl<C> ActionRegistry<C> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register<F>(&mut self, name: &str, handler: F) -> Result<(), BtError>
    where
        F: Fn(&mut C, &mut Blackboard) -> NodeStatus + Send + Sync + 'static,
    {
        if name.is_empty() {
            return Err(BtError::EmptyActionName);
        }
        if self.handlers.contains_key(name) {
            return Err(BtError::DuplicateAction(name.to_string()));
        }
        self.handlers.insert(name.to_string(), Box::new(handler));
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.handlers.contains_key(name)
    }

    /// Fails with the first action in `tree` that has no handler.
    pub fn check_tree(&self, tree: &BtNode) -> Result<(), BtError> {
        match tree.action_names().into_iter().find(|n| !self.contains(n)) {
            Some(missing) => Err(BtError::UnknownAction(missing.to_string())),
            None => Ok(()),
        }
    }
}

/// Tick `node` once. Composites short-circuit: a Sequence stops at the first
/// non-Success child, a Fallback at the first non-Failure child.
pub fn tick<C>(
    node: &BtNode,
    registry: &ActionRegistry<C>,
    ctx: &mut C,
    bb: &mut Blackboard,
) -> Result<NodeStatus, BtError> {
    match &node.kind {
        NodeKind::Action(name) => {
            let handler = registry
                .handlers
                .get(name)
                .ok_or_else(|| BtError::UnknownAction(name.clone()))?;
            Ok(handler(ctx, bb))
        }
        NodeKind::Sequence => {
            for child in &node.children {
                match tick(child, registry, ctx, bb)? {
                    NodeStatus::Success => continue,
                    other => return Ok(other),
                }
            }
            Ok(NodeStatus::Success)
        }
        NodeKind::Fallback => {
            for child in &node.children {
                match tick(child, registry, ctx, bb)? {
                    NodeStatus::Failure => continue,
                    other => return Ok(other),
                }
            }
            Ok(NodeStatus::Failure)
        }
    }
}
