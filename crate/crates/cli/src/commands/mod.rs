pub mod classify;
pub mod penetration;
pub mod vibration;
