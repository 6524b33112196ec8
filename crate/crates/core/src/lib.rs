pub mod analytics;
pub mod bridge;
pub mod datamodel;
pub mod mlcore;
pub mod phm;
pub mod pipeline;
