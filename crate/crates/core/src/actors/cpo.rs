use std::collections::BTreeMap;

use super::messages::*;
use super::{unexpected, ActorError, Addr, Ctx};
use crate::codec::{tags, Envelope};
use crate::crypto::CryptoSuite;

/// Charge point operator. Routes billing between its charge points and the
/// EMSPs, dropping location data on the way.
pub struct Cpo {
    pub addr: Addr,
    pending: BTreeMap<[u8; 16], Addr>,
    pub forwarded: u64,
}

impl Cpo {
    pub fn new(addr: Addr) -> Self {
        Self { addr, pending: BTreeMap::new(), forwarded: 0 }
    }

    pub fn handle<S: CryptoSuite>(
        &mut self,
        ctx: &mut Ctx<'_, S>,
        from: Addr,
        env: &Envelope,
    ) -> Result<(), ActorError> {
        match env.msg_type {
            tags::BILLING_FORWARD_REQ => {
                let mut req: BillingForwardReq = open_envelope(env)?;
                if !matches!(from, Addr::Cp(_)) {
                    return Err(unexpected(ctx.me, env, "billing only from charge points"));
                }
                let emsp = ctx
                    .ledger
                    .cred_defs_for_emsp(&req.emsp_id)
                    .first()
                    .and_then(|d| ctx.directory.get(&d.issuer).copied())
                    .ok_or_else(|| ActorError::UnknownEmsp(req.emsp_id.clone()))?;
                req.location = None;
                self.pending.insert(req.session_id, from);
                self.forwarded += 1;
                ctx.send(emsp, &envelope(&req));
                Ok(())
            }
            tags::BILLING_ACK => {
                let ack: BillingAck = open_envelope(env)?;
                let cp = self
                    .pending
                    .remove(&ack.session_id)
                    .ok_or_else(|| unexpected(ctx.me, env, "no pending billing"))?;
                ctx.send(cp, &envelope(&ack));
                Ok(())
            }
            _ => Err(unexpected(ctx.me, env, "ready")),
        }
    }
}
