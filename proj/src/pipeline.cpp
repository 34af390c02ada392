#include "eui64leak/pipeline.hpp"

#include <algorithm>
#include <istream>

#include "eui64leak/errors.hpp"
#include "eui64leak/text.hpp"

namespace eui64leak {

namespace {
constexpr std::size_t kChunkBytes = 1 << 20;
constexpr std::size_t kMaxQueued = 8;
constexpr std::size_t kKeptErrors = 20;
}  // namespace

IngestPipeline::IngestPipeline(const AnalysisContext& ctx, unsigned threads) : ctx_(ctx) {
  threads = std::max(threads, 1u);
  for (unsigned i = 0; i < threads; ++i) workers_.push_back(std::make_unique<Worker>(ctx));
  if (threads > 1) {
    for (auto& w : workers_) threads_.emplace_back([this, wp = w.get()] { run(*wp); });
  }
}

IngestPipeline::~IngestPipeline() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  not_empty_.notify_all();
  for (auto& t : threads_) {
    if (t.joinable()) t.join();
  }
}

void IngestPipeline::process(Worker& w, const Job& job) {
  std::string_view rest = job.text;
  std::size_t line_no = job.first_line;
  while (!rest.empty()) {
    auto nl = rest.find('\n');
    std::string_view line = rest.substr(0, nl);
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    std::size_t this_line = line_no++;
    if (text::trim(line).empty()) continue;
    ++w.stats.lines;
    if (this_line == 1 && is_flow_header(line)) continue;
    try {
      auto rec = parse_flow(line, this_line);
      if (!rec) {
        ++w.stats.skipped_non_ipv6;
        continue;
      }
      ++w.stats.records;
      w.acc.add(*rec);
    } catch (const ParseError& e) {
      ++w.stats.malformed;
      if (w.stats.errors.size() < kKeptErrors) w.stats.errors.emplace_back(this_line, e.what());
    }
  }
}

void IngestPipeline::run(Worker& w) {
  while (true) {
    Job job;
    {
      std::unique_lock lock(mu_);
      not_empty_.wait(lock, [&] { return closed_ || !queue_.empty(); });
      if (queue_.empty()) return;
      job = std::move(queue_.front());
      queue_.pop_front();
    }
    not_full_.notify_one();
    process(w, job);
  }
}

void IngestPipeline::ingest_text(std::string chunk) {
  std::size_t lines = static_cast<std::size_t>(std::count(chunk.begin(), chunk.end(), '\n'));
  if (!chunk.empty() && chunk.back() != '\n') ++lines;
  Job job{std::move(chunk), next_line_};
  next_line_ += lines;
  if (threads_.empty()) {
    process(*workers_.front(), job);
    return;
  }
  {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return queue_.size() < kMaxQueued; });
    queue_.push_back(std::move(job));
  }
  not_empty_.notify_one();
}

void IngestPipeline::ingest_stream(std::istream& in) {
  std::string carry;
  std::string buf(kChunkBytes, '\0');
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    auto got = static_cast<std::size_t>(in.gcount());
    if (got == 0) break;
    carry.append(buf.data(), got);
    auto last_nl = carry.rfind('\n');
    if (last_nl == std::string::npos) continue;
    std::string tail = carry.substr(last_nl + 1);
    carry.resize(last_nl + 1);
    ingest_text(std::move(carry));
    carry = std::move(tail);
  }
  if (in.bad()) throw IoError("error while reading flow input");
  if (!carry.empty()) ingest_text(std::move(carry));
}

void IngestPipeline::ingest_record(const FlowRecord& flow) {
  auto& w = *workers_.front();
  ++w.stats.lines;
  ++w.stats.records;
  w.acc.add(flow);
  ++next_line_;
}

FlowAccumulator IngestPipeline::finish() {
  if (finished_) throw ContractViolation("IngestPipeline::finish called twice");
  finished_ = true;
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  not_empty_.notify_all();
  for (auto& t : threads_) t.join();
  threads_.clear();

  FlowAccumulator merged(ctx_);
  for (auto& w : workers_) {
    merged.merge(std::move(w->acc));
    stats_.merge(w->stats);
  }
  return merged;
}

}  // namespace eui64leak
