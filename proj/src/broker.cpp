#include "flowforge/broker.hpp"

#include <algorithm>

#include "flowforge/error.hpp"

namespace flowforge {

namespace detail {

struct GroupState {
  std::int64_t committed = -1;
  bool active = false;
};

struct Topic {
  std::mutex mutex;
  std::condition_variable cv;
  std::deque<Message> messages;
  std::int64_t base_offset = 0;
  std::map<std::string, GroupState> groups;

  std::int64_t end() const { return base_offset + static_cast<std::int64_t>(messages.size()); }
};

}  // namespace detail

namespace {

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

std::string workflow_topic(std::string_view workflow, std::string_view from, std::string_view to) {
  return "wf." + std::string(workflow) + "." + std::string(from) + "-" + std::string(to);
}

std::string optimizer_topic(std::string_view job_id, std::string_view stage) {
  return "opt." + std::string(job_id) + "." + std::string(stage);
}

Subscription::Subscription(std::shared_ptr<detail::Topic> topic, std::string topic_name,
                           std::string group, std::int64_t next)
    : topic_(std::move(topic)),
      topic_name_(std::move(topic_name)),
      group_(std::move(group)),
      next_(next) {}

Subscription::Subscription(Subscription&& other) noexcept
    : topic_(std::move(other.topic_)),
      topic_name_(std::move(other.topic_name_)),
      group_(std::move(other.group_)),
      next_(other.next_),
      first_delivered_(other.first_delivered_),
      last_delivered_(other.last_delivered_) {
  other.topic_.reset();
}

Subscription& Subscription::operator=(Subscription&& other) noexcept {
  if (this != &other) {
    release();
    topic_ = std::move(other.topic_);
    topic_name_ = std::move(other.topic_name_);
    group_ = std::move(other.group_);
    next_ = other.next_;
    first_delivered_ = other.first_delivered_;
    last_delivered_ = other.last_delivered_;
    other.topic_.reset();
  }
  return *this;
}

Subscription::~Subscription() { release(); }

void Subscription::release() {
  if (!topic_) return;
  std::lock_guard lock(topic_->mutex);
  topic_->groups[group_].active = false;
  topic_.reset();
}

std::int64_t Subscription::committed_offset() const {
  if (!topic_) return -1;
  std::lock_guard lock(topic_->mutex);
  return topic_->groups[group_].committed;
}

std::shared_ptr<detail::Topic> Broker::topic(std::string_view name, bool create) {
  {
    std::shared_lock lock(mutex_);
    auto it = topics_.find(name);
    if (it != topics_.end()) return it->second;
  }
  if (!create) return nullptr;
  std::unique_lock lock(mutex_);
  auto [it, inserted] = topics_.try_emplace(std::string(name), nullptr);
  if (inserted) it->second = std::make_shared<detail::Topic>();
  return it->second;
}

std::int64_t Broker::publish(std::string_view topic_name, std::string payload) {
  if (topic_name.empty()) throw Error(Errc::kInvalidArgument, "topic name must not be empty");
  auto t = topic(topic_name, true);
  std::int64_t offset;
  {
    std::lock_guard lock(t->mutex);
    offset = t->end();
    t->messages.push_back(Message{std::string(topic_name), std::move(payload), offset, now_ms()});
    if (options_.retention_max && t->messages.size() > *options_.retention_max) {
      t->messages.pop_front();
      ++t->base_offset;
    }
  }
  t->cv.notify_all();
  return offset;
}

Subscription Broker::subscribe(std::string_view topic_name, std::string_view group) {
  if (topic_name.empty()) throw Error(Errc::kInvalidArgument, "topic name must not be empty");
  auto t = topic(topic_name, true);
  std::lock_guard lock(t->mutex);
  auto& state = t->groups[std::string(group)];
  if (state.active) {
    throw Error(Errc::kGroupBusy, "group '" + std::string(group) + "' already has an active consumer on " +
                                      std::string(topic_name));
  }
  state.active = true;
  return Subscription(t, std::string(topic_name), std::string(group), state.committed + 1);
}

std::vector<Message> Broker::poll(Subscription& sub, std::size_t max_messages,
                                  std::chrono::milliseconds timeout) {
  if (!sub.topic_) throw Error(Errc::kInvalidArgument, "subscription is no longer active");
  if (max_messages == 0) throw Error(Errc::kInvalidArgument, "max_messages must be at least 1");
  auto& t = *sub.topic_;
  std::unique_lock lock(t.mutex);
  auto ready = [&] { return std::max(sub.next_, t.base_offset) < t.end(); };
  if (!ready()) t.cv.wait_for(lock, timeout, ready);
  std::vector<Message> out;
  sub.next_ = std::max(sub.next_, t.base_offset);
  while (sub.next_ < t.end() && out.size() < max_messages) {
    out.push_back(t.messages[static_cast<std::size_t>(sub.next_ - t.base_offset)]);
    ++sub.next_;
  }
  if (!out.empty()) {
    if (sub.first_delivered_ < 0) sub.first_delivered_ = out.front().offset;
    sub.last_delivered_ = out.back().offset;
  }
  return out;
}

void Broker::commit(Subscription& sub, std::int64_t offset) {
  if (!sub.topic_) throw Error(Errc::kInvalidArgument, "subscription is no longer active");
  if (sub.first_delivered_ < 0 || offset < sub.first_delivered_ || offset > sub.last_delivered_) {
    throw Error(Errc::kInvalidOffset,
                "offset " + std::to_string(offset) + " was not delivered to this subscription",
                {{"offset", offset}});
  }
  std::lock_guard lock(sub.topic_->mutex);
  auto& state = sub.topic_->groups[sub.group_];
  state.committed = std::max(state.committed, offset);
}

std::int64_t Broker::committed_offset(std::string_view topic_name, std::string_view group) const {
  std::shared_lock lock(mutex_);
  auto it = topics_.find(topic_name);
  if (it == topics_.end()) return -1;
  std::lock_guard tlock(it->second->mutex);
  auto g = it->second->groups.find(std::string(group));
  return g == it->second->groups.end() ? -1 : g->second.committed;
}

std::int64_t Broker::end_offset(std::string_view topic_name) const {
  std::shared_lock lock(mutex_);
  auto it = topics_.find(topic_name);
  if (it == topics_.end()) return 0;
  std::lock_guard tlock(it->second->mutex);
  return it->second->end();
}

std::optional<Message> Broker::last_message(std::string_view topic_name) const {
  std::shared_lock lock(mutex_);
  auto it = topics_.find(topic_name);
  if (it == topics_.end()) return std::nullopt;
  std::lock_guard tlock(it->second->mutex);
  if (it->second->messages.empty()) return std::nullopt;
  return it->second->messages.back();
}

std::vector<std::string> Broker::topics() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [name, t] : topics_) out.push_back(name);
  return out;
}

void Broker::drop_topic(std::string_view topic_name) {
  std::unique_lock lock(mutex_);
  auto it = topics_.find(topic_name);
  if (it != topics_.end()) topics_.erase(it);
}

}  // namespace flowforge
