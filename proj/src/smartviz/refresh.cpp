#include "flowforge/smartviz.hpp"

namespace flowforge::viz {

RefreshHandle::RefreshHandle(std::function<TableFrame()> compute, std::chrono::milliseconds interval,
                             FrameCallback on_frame, ErrorCallback on_error)
    : compute_(std::move(compute)),
      interval_(interval),
      on_frame_(std::move(on_frame)),
      on_error_(std::move(on_error)),
      worker_([this] { loop(); }) {}

RefreshHandle::~RefreshHandle() { cancel(); }

void RefreshHandle::cancel() {
  {
    std::lock_guard lock(mutex_);
    cancelled_ = true;
  }
  cv_.notify_all();
  if (worker_.joinable() && worker_.get_id() != std::this_thread::get_id()) worker_.join();
}

void RefreshHandle::loop() {
  auto next = std::chrono::steady_clock::now();
  for (;;) {
    {
      std::unique_lock lock(mutex_);
      if (cv_.wait_until(lock, next, [&] { return cancelled_; })) return;
    }
    try {
      auto frame = compute_();
      if (on_frame_) on_frame_(frame);
      ++emissions_;
    } catch (const Error& e) {
      if (on_error_) on_error_(e);
    } catch (const std::exception& e) {
      if (on_error_) on_error_(Error(Errc::kInternal, e.what()));
    }
    next += interval_;
    auto now = std::chrono::steady_clock::now();
    if (next < now) next = now;
  }
}

std::unique_ptr<RefreshHandle> stream_refresh(SourceRegistry& sources, QuerySpec spec,
                                              std::chrono::milliseconds interval,
                                              RefreshHandle::FrameCallback on_frame,
                                              RefreshHandle::ErrorCallback on_error) {
  if (interval < std::chrono::milliseconds(100)) {
    throw Error(Errc::kInvalidArgument, "refresh interval must be at least 100 ms",
                {{"interval_ms", interval.count()}});
  }
  auto compute = [&sources, spec = std::move(spec)] {
    return run_query(sources.read(spec.source_id, spec.table), spec);
  };
  return std::make_unique<RefreshHandle>(std::move(compute), interval, std::move(on_frame), std::move(on_error));
}

}  // namespace flowforge::viz
