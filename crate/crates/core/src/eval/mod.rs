//! Ranking metrics, link prediction and next-job prediction harnesses.

mod linkpred;
mod metrics;
mod mobility;

pub use linkpred::{
    edge_embed, link_prediction_auc, make_link_split, Edge, EdgeOperator, LinkPredConfig, LinkPredReport,
    LinkSplit, OperatorResult, HOLDOUT_FRACTION,
};
pub use metrics::{auc, average_precision_at_k, hit_rate_at_n, ndcg_at_n, precision_at_n, RankingResult};
pub use mobility::{map_at_10_mobility, map_trajectories, mobility_map_at_10, MobilityReport};
