pub mod bench;
pub mod gramians;
pub mod place;
pub mod verify;
