//! Hierarchical web-automation agent.
//!
//! A planner decomposes a task into sub-tasks and hands them one at a time
//! to a navigation agent, which drives a browser session through a small set
//! of skills. Pages are sensed through distilled DOM views and every action
//! reports what changed on the page.

pub mod agents;
pub mod change;
pub mod distill;
pub mod dom;
pub mod harness;
pub mod llm;
pub mod sim;
pub mod skills;
pub mod trace;
