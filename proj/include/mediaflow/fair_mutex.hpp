#pragma once

#include <mutex>
#include <shared_mutex>

namespace mediaflow {

// Reader/writer lock in which a waiting writer blocks new readers. glibc's
// default rwlock prefers readers, so a busy query load could otherwise
// starve writers indefinitely.
class FairSharedMutex {
 public:
  void lock() {
    std::lock_guard gate(turnstile_);
    mutex_.lock();
  }
  void unlock() { mutex_.unlock(); }

  void lock_shared() {
    std::lock_guard gate(turnstile_);
    mutex_.lock_shared();
  }
  void unlock_shared() { mutex_.unlock_shared(); }

 private:
  std::mutex turnstile_;
  std::shared_mutex mutex_;
};

}  // namespace mediaflow
