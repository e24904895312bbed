#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "netmodel.hpp"

namespace iiotfwd {

struct StatusMsg {
  double energy = 0.0;
};

struct PlanMsg {
  std::size_t entries = 0;
};

/// Sent to previous(i, failed) when `failed` leaves the leg. Carries what the
/// recipient needs to reconnect to `failed_next` without asking anyone.
struct AlertMsg {
  NodeId failed;
  NodeId failed_next;
  double failed_rank = 0.0;
  double next_rank = 0.0;  // lower bound on rank(failed_next)
};

/// Asks the recipient to sit between `upstream` and the rest of the route.
/// `chain` lists further relays still to be joined before `downstream`.
struct JoinMsg {
  NodeId upstream;
  NodeId downstream;
  double lo = 0.0;  // rank(upstream)
  double hi = 0.0;  // lower bound on rank(downstream)
  std::vector<NodeId> chain;
};

enum class DeleteArg : std::uint8_t { No, Yes };
enum class DirArg : std::uint8_t { Fwd, Bwd };

struct ModifyPathMsg {
  NodeId joiner;
  DeleteArg del = DeleteArg::No;
  DirArg dir = DirArg::Fwd;
  double joiner_rank = 0.0;
  std::uint64_t wave = 0;
};

struct RouteRequestMsg {
  NodeId origin;
  NodeId target;
  std::uint64_t request = 0;
  int ttl = 0;  // relays still allowed
  double min_lifetime = 0.0;
  std::vector<NodeId> hops;  // origin first, sender last
  double lo = 0.0;           // origin's rank; only nodes ranked below it on the leg may relay
};

struct RouteReplyMsg {
  std::uint64_t request = 0;
  std::vector<NodeId> route;  // origin ... target
};

using MessageBody = std::variant<StatusMsg, PlanMsg, AlertMsg, JoinMsg, ModifyPathMsg, RouteRequestMsg, RouteReplyMsg>;

struct Message {
  NodeId src;
  NodeId dst;
  bool from_controller = false;
  bool to_controller = false;
  bool last_gasp = false;  // sent while disconnecting, paid from whatever is left
  LegKey leg;
  MessageBody body;
};

const char* message_name(const MessageBody& body);

/// "cycle type src dst leg", with C standing for the controller.
std::string trace_line(std::uint64_t cycle, const Message& m);

}  // namespace iiotfwd
