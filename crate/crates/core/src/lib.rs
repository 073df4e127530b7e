pub mod apf;
pub mod envstore;
pub mod geometry;
pub mod kinematics;
pub mod ral;
pub mod sim;
