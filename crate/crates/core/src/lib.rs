//! Self-sovereign identity based contract authentication for EV charging.
//!
//! * [`codec`]: canonical TLV encoding for every message and value.
//! * [`crypto`]: DID keys, sealed boxes, HMAC, CL credentials, accumulator
//!   revocation, with concrete and symbolic backends.
//! * [`ledger`]: in-memory verifiable data registry with write permissions.
//! * [`actors`]: steward, EV wallet, EMSP, CP and CPO state machines.
//! * [`harness`]: message bus, adversaries, scenarios, property checkers and
//!   benchmarks.

pub mod actors;
pub mod codec;
pub mod crypto;
pub mod harness;
pub mod ledger;
