pub mod agent;
pub mod artifacts;
pub mod sandbox;
pub mod data;
pub mod forge;
pub mod feedback;
pub mod workflow;
