#pragma once

// Chunked, optionally multi-threaded flow ingestion. Each worker owns a
// FlowAccumulator; finish() merges them, so the result is independent of the
// number of workers.

#include <condition_variable>
#include <deque>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "eui64leak/analysis.hpp"

namespace eui64leak {

class IngestPipeline {
 public:
  IngestPipeline(const AnalysisContext& ctx, unsigned threads);
  ~IngestPipeline();

  IngestPipeline(const IngestPipeline&) = delete;
  IngestPipeline& operator=(const IngestPipeline&) = delete;

  void ingest_stream(std::istream& in);
  // `chunk` must hold whole lines. The first line of the first chunk may be
  // a header.
  void ingest_text(std::string chunk);
  void ingest_record(const FlowRecord& flow);

  // Joins workers and returns the merged state. Call once.
  FlowAccumulator finish();
  const IngestStats& stats() const noexcept { return stats_; }

 private:
  struct Job {
    std::string text;
    std::size_t first_line;
  };
  struct Worker {
    explicit Worker(const AnalysisContext& ctx) : acc(ctx) {}
    FlowAccumulator acc;
    IngestStats stats;
  };

  void process(Worker& w, const Job& job);
  void run(Worker& w);

  const AnalysisContext& ctx_;
  std::vector<std::unique_ptr<Worker>> workers_;
  std::vector<std::thread> threads_;
  std::deque<Job> queue_;
  std::mutex mu_;
  std::condition_variable not_empty_;
  std::condition_variable not_full_;
  bool closed_ = false;
  bool finished_ = false;
  std::size_t next_line_ = 1;
  IngestStats stats_;
};

}  // namespace eui64leak
