//! The multi-scale attention purification block and the channel-wise
//! shrinkage (DM) block.

mod dm;
mod msap;
mod shrink;

pub use dm::{dm_forward, DmBlock, DmCache};
pub use msap::{msap_forward, MsapBlock, MsapCache, MsapMode, Residual, ScaleFeed};
pub use shrink::{dm_thresholds, shrink_backward, shrink_forward, ShrinkCache};
