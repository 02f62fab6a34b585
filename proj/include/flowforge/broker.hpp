#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

namespace flowforge {

/// Topic carrying records between stream nodes `from` and `to`.
std::string workflow_topic(std::string_view workflow, std::string_view from, std::string_view to);
/// Topic carrying one optimizer stage's output for a job.
std::string optimizer_topic(std::string_view job_id, std::string_view stage);

struct Message {
  std::string topic;
  std::string payload;
  std::int64_t offset = 0;
  std::int64_t timestamp_ms = 0;
};

namespace detail {
struct Topic;
}

/// Consumer handle for one (topic, group). At most one handle per group is
/// active; dropping the handle without committing leaves the group at its
/// last committed offset, so the next subscriber sees redelivery.
class Subscription {
 public:
  Subscription(Subscription&& other) noexcept;
  Subscription& operator=(Subscription&& other) noexcept;
  Subscription(const Subscription&) = delete;
  Subscription& operator=(const Subscription&) = delete;
  ~Subscription();

  const std::string& topic() const { return topic_name_; }
  const std::string& group() const { return group_; }
  /// The group's committed offset, -1 when nothing has been committed.
  std::int64_t committed_offset() const;
  /// Offset the next poll starts from.
  std::int64_t position() const { return next_; }

 private:
  friend class Broker;
  Subscription(std::shared_ptr<detail::Topic> topic, std::string topic_name, std::string group,
               std::int64_t next);
  void release();

  std::shared_ptr<detail::Topic> topic_;
  std::string topic_name_;
  std::string group_;
  std::int64_t next_ = 0;
  std::int64_t first_delivered_ = -1;
  std::int64_t last_delivered_ = -1;
};

/// In-process publish/subscribe broker: one partition per topic, dense
/// offsets from 0, broadcast across consumer groups, queue within a group,
/// at-least-once delivery driven by explicit commits.
class Broker {
 public:
  struct Options {
    /// Per-topic cap on retained messages; oldest are dropped first.
    std::optional<std::size_t> retention_max;
  };

  Broker() = default;
  explicit Broker(Options options) : options_(options) {}
  Broker(const Broker&) = delete;
  Broker& operator=(const Broker&) = delete;

  /// Returns the assigned offset. Topics are created on first use.
  std::int64_t publish(std::string_view topic, std::string payload);

  /// Throws kGroupBusy if another handle of the group is alive.
  Subscription subscribe(std::string_view topic, std::string_view group);

  /// Blocks up to `timeout` for at least one message; returns at most
  /// `max_messages` in offset order.
  std::vector<Message> poll(Subscription& subscription, std::size_t max_messages,
                            std::chrono::milliseconds timeout);

  /// Raises the group's committed offset to max(current, offset). The offset
  /// must have been delivered to this handle, else kInvalidOffset.
  void commit(Subscription& subscription, std::int64_t offset);

  std::int64_t committed_offset(std::string_view topic, std::string_view group) const;
  /// Offset the next publish will receive.
  std::int64_t end_offset(std::string_view topic) const;
  std::optional<Message> last_message(std::string_view topic) const;
  std::vector<std::string> topics() const;
  /// Forgets a topic and its groups. Live handles keep the detached topic.
  void drop_topic(std::string_view topic);

 private:
  std::shared_ptr<detail::Topic> topic(std::string_view name, bool create);

  Options options_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<detail::Topic>, std::less<>> topics_;
};

}  // namespace flowforge
