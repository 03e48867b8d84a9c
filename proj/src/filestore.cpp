#include "ntx/filestore.hpp"

#include <stdexcept>

namespace ntx {

namespace {

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

constexpr std::uint64_t kFnvSeed = 14695981039346656037ull;

}  // namespace

FileState::FileState() : rep_(std::make_shared<Rep>()) {}

FileState FileState::from_pages(const std::vector<std::string>& pages) {
  auto rep = std::make_shared<Rep>();
  rep->pages.reserve(pages.size());
  for (const auto& p : pages)
    rep->pages.push_back(std::make_shared<const std::string>(p));
  return FileState(std::move(rep));
}

std::size_t FileState::page_count() const { return rep_->pages.size(); }

const std::string& FileState::page(std::size_t idx) const {
  if (idx >= rep_->pages.size())
    throw std::out_of_range("no such page: " + std::to_string(idx));
  return *rep_->pages[idx];
}

FileState FileState::with_page(std::size_t idx, std::string content) const {
  if (idx > rep_->pages.size())
    throw std::out_of_range("page write leaves a gap at " + std::to_string(idx));
  auto rep = std::make_shared<Rep>();
  rep->pages = rep_->pages;  // shares page bodies
  auto page = std::make_shared<const std::string>(std::move(content));
  if (idx == rep->pages.size())
    rep->pages.push_back(std::move(page));
  else
    rep->pages[idx] = std::move(page);
  rep->version = rep_->version + 1;
  return FileState(std::move(rep));
}

int FileState::version() const { return rep_->version; }

std::uint64_t FileState::content_hash() const {
  std::uint64_t h = kFnvSeed;
  for (const auto& p : rep_->pages) {
    std::size_t n = p->size();
    h = fnv1a(h, &n, sizeof n);
    h = fnv1a(h, p->data(), p->size());
  }
  return h;
}

bool FileState::same_content(const FileState& other) const {
  if (rep_ == other.rep_) return true;
  if (page_count() != other.page_count()) return false;
  for (std::size_t i = 0; i < page_count(); ++i)
    if (*rep_->pages[i] != *other.rep_->pages[i]) return false;
  return true;
}

std::vector<std::string> FileState::pages() const {
  std::vector<std::string> out;
  out.reserve(rep_->pages.size());
  for (const auto& p : rep_->pages) out.push_back(*p);
  return out;
}

const std::vector<LogRecord> DurableStore::kEmptyLog;

void DurableStore::add_replica(const std::string& file, SiteId site,
                               const FileState& initial) {
  replicas_.insert_or_assign({file, site.ordinal}, initial);
}

bool DurableStore::has_replica(const std::string& file, SiteId site) const {
  return replicas_.count({file, site.ordinal}) > 0;
}

const FileState& DurableStore::state(const std::string& file, SiteId site) const {
  auto it = replicas_.find({file, site.ordinal});
  if (it == replicas_.end())
    throw std::runtime_error("site " + site.str() + " stores no replica of " + file);
  return it->second;
}

int DurableStore::apply_committed(const std::string& file, SiteId site,
                                  const FileState& s) {
  auto it = replicas_.find({file, site.ordinal});
  if (it == replicas_.end())
    throw std::runtime_error("site " + site.str() + " stores no replica of " + file);
  const FileState& old = it->second;
  int changed = 0;
  std::size_t common = std::min(old.page_count(), s.page_count());
  for (std::size_t i = 0; i < common; ++i)
    if (old.page(i) != s.page(i)) ++changed;
  changed += static_cast<int>(std::max(old.page_count(), s.page_count()) - common);
  it->second = s;
  page_writes_[site.ordinal] += changed;
  return changed;
}

long DurableStore::page_writes(SiteId site) const {
  auto it = page_writes_.find(site.ordinal);
  return it == page_writes_.end() ? 0 : it->second;
}

long DurableStore::total_page_writes() const {
  long n = 0;
  for (const auto& [_, v] : page_writes_) n += v;
  return n;
}

std::uint64_t DurableStore::content_hash() const {
  std::uint64_t h = kFnvSeed;
  for (const auto& [key, state] : replicas_) {
    h = fnv1a(h, key.first.data(), key.first.size());
    h = fnv1a(h, &key.second, sizeof key.second);
    std::uint64_t ch = state.content_hash();
    h = fnv1a(h, &ch, sizeof ch);
  }
  return h;
}

void DurableStore::log_prepared(SiteId site, const Tid& t, const std::string& file,
                                const FileState& state) {
  LogRecord r;
  r.kind = LogRecord::Kind::PREPARED;
  r.tid = t;
  r.file = file;
  r.state = state;
  logs_[site.ordinal].push_back(std::move(r));
}

void DurableStore::log_commit_point(SiteId site, const Tid& t) {
  LogRecord r;
  r.kind = LogRecord::Kind::COMMIT_POINT;
  r.tid = t;
  logs_[site.ordinal].push_back(std::move(r));
}

void DurableStore::log_resolved(SiteId site, const Tid& t, const std::string& file,
                                bool committed) {
  LogRecord r;
  r.kind = LogRecord::Kind::RESOLVED;
  r.tid = t;
  r.file = file;
  r.committed = committed;
  logs_[site.ordinal].push_back(std::move(r));
}

bool DurableStore::has_commit_point(SiteId site, const Tid& t) const {
  auto it = logs_.find(site.ordinal);
  if (it == logs_.end()) return false;
  for (const auto& r : it->second)
    if (r.kind == LogRecord::Kind::COMMIT_POINT && r.tid == t) return true;
  return false;
}

std::vector<LogRecord> DurableStore::unresolved_prepared(SiteId site) const {
  std::vector<LogRecord> out;
  auto it = logs_.find(site.ordinal);
  if (it == logs_.end()) return out;
  for (const auto& r : it->second) {
    if (r.kind == LogRecord::Kind::PREPARED) {
      bool resolved = false;
      for (const auto& q : it->second)
        if (q.kind == LogRecord::Kind::RESOLVED && q.tid == r.tid &&
            q.file == r.file) {
          resolved = true;
          break;
        }
      if (!resolved) out.push_back(r);
    }
  }
  return out;
}

bool DurableStore::in_doubt(const std::string& file, SiteId site) const {
  for (const auto& r : unresolved_prepared(site))
    if (r.file == file) return true;
  return false;
}

const std::vector<LogRecord>& DurableStore::log(SiteId site) const {
  auto it = logs_.find(site.ordinal);
  return it == logs_.end() ? kEmptyLog : it->second;
}

}  // namespace ntx
