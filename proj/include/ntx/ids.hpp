#pragma once

#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ntx {

// Ordinal of a simulated site.
struct SiteId {
  int ordinal = -1;

  auto operator<=>(const SiteId&) const = default;
  bool valid() const { return ordinal >= 0; }
  std::string str() const;  // "s3"
};

// Identifier of a simulated process.  The site that runs the process is part
// of the value, so any holder of a Pid can tell where to send a reply.
struct Pid {
  SiteId site;
  int serial = 0;

  auto operator<=>(const Pid&) const = default;
  bool valid() const { return site.valid() && serial > 0; }
  std::string str() const;  // "s3.p2"
};

enum class LockMode { READ, WRITE };

// Outcome of an invocation as seen by the caller.  UNKNOWN_OUTCOME is
// reported when a top-level transaction is severed from its caller after the
// request was issued: the work may or may not have committed.
enum class CompletionCode { COMMITTED, ABORTED, UNKNOWN_OUTCOME };

const char* to_string(LockMode m);
const char* to_string(CompletionCode c);

// Transaction identifier.  The path holds one (home site, per-site serial)
// element per level of the invocation tree, root first, so the identifiers of
// all superiors are recoverable from the value itself.  The home site of the
// transaction is the site of the last element.
class Tid {
 public:
  struct Elem {
    SiteId site;
    int serial = 0;
    auto operator<=>(const Elem&) const = default;
  };

  Tid() = default;  // empty value meaning "no transaction"

  static Tid top_level(SiteId home, int serial);
  Tid child(SiteId home, int serial) const;

  bool empty() const { return path_.empty(); }
  int depth() const { return static_cast<int>(path_.size()); }
  const std::vector<Elem>& path() const { return path_; }

  SiteId home_site() const;            // site of the last element
  std::optional<Tid> parent() const;   // nullopt for a top-level transaction
  bool top_level() const { return path_.size() == 1; }

  std::string str() const;  // "s1.t1/s2.t1"
  static std::optional<Tid> parse(std::string_view text);

  auto operator<=>(const Tid&) const = default;

 private:
  explicit Tid(std::vector<Elem> path) : path_(std::move(path)) {}
  std::vector<Elem> path_;
};

// Prefix test over paths.  Reflexive: every transaction is its own ancestor.
bool is_ancestor(const Tid& a, const Tid& b);

// Proper-prefix test: a is a superior of b but not b itself.
bool is_superior(const Tid& a, const Tid& b);

// Home sites of the transaction and all of its superiors (root first).
// A transaction is reachable only while every one of these is accessible.
std::vector<SiteId> chain_sites(const Tid& t);

}  // namespace ntx
