#include "ntx/ids.hpp"

#include <sstream>

namespace ntx {

std::string SiteId::str() const {
  std::ostringstream os;
  os << 's' << ordinal;
  return os.str();
}

std::string Pid::str() const {
  std::ostringstream os;
  os << 's' << site.ordinal << ".p" << serial;
  return os.str();
}

const char* to_string(LockMode m) {
  return m == LockMode::READ ? "read" : "write";
}

const char* to_string(CompletionCode c) {
  switch (c) {
    case CompletionCode::COMMITTED: return "COMMITTED";
    case CompletionCode::ABORTED: return "ABORTED";
    case CompletionCode::UNKNOWN_OUTCOME: return "UNKNOWN_OUTCOME";
  }
  return "?";
}

Tid Tid::top_level(SiteId home, int serial) {
  return Tid({Elem{home, serial}});
}

Tid Tid::child(SiteId home, int serial) const {
  std::vector<Elem> p = path_;
  p.push_back(Elem{home, serial});
  return Tid(std::move(p));
}

SiteId Tid::home_site() const {
  return path_.empty() ? SiteId{} : path_.back().site;
}

std::optional<Tid> Tid::parent() const {
  if (path_.size() <= 1) return std::nullopt;
  return Tid(std::vector<Elem>(path_.begin(), path_.end() - 1));
}

std::string Tid::str() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < path_.size(); ++i) {
    if (i) os << '/';
    os << 's' << path_[i].site.ordinal << ".t" << path_[i].serial;
  }
  return os.str();
}

std::optional<Tid> Tid::parse(std::string_view text) {
  if (!text.empty() && text.back() == '/') return std::nullopt;
  std::vector<Elem> path;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('/', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view part = text.substr(pos, end - pos);
    // "s<ordinal>.t<serial>"
    std::size_t dot = part.find(".t");
    if (part.size() < 4 || part[0] != 's' || dot == std::string_view::npos)
      return std::nullopt;
    try {
      Elem e;
      e.site.ordinal = std::stoi(std::string(part.substr(1, dot - 1)));
      e.serial = std::stoi(std::string(part.substr(dot + 2)));
      if (e.serial <= 0 || e.site.ordinal < 0) return std::nullopt;
      path.push_back(e);
    } catch (const std::exception&) {
      return std::nullopt;
    }
    pos = end + 1;
  }
  if (path.empty()) return std::nullopt;
  return Tid(std::move(path));
}

bool is_ancestor(const Tid& a, const Tid& b) {
  if (a.empty() || a.depth() > b.depth()) return false;
  const auto& ap = a.path();
  const auto& bp = b.path();
  for (std::size_t i = 0; i < ap.size(); ++i)
    if (ap[i] != bp[i]) return false;
  return true;
}

bool is_superior(const Tid& a, const Tid& b) {
  return a.depth() < b.depth() && is_ancestor(a, b);
}

std::vector<SiteId> chain_sites(const Tid& t) {
  std::vector<SiteId> sites;
  sites.reserve(t.path().size());
  for (const auto& e : t.path()) sites.push_back(e.site);
  return sites;
}

}  // namespace ntx
