#pragma once

#include <memory>
#include <mutex>
#include <utility>

namespace prism {

// Holds an immutable value that readers copy out and a single writer swaps.
// Readers keep the old value alive until they drop their shared_ptr, so an
// in-flight evaluation always finishes on the snapshot it started with.
template <typename T>
class SnapshotCell {
 public:
  explicit SnapshotCell(std::shared_ptr<const T> value) : value_(std::move(value)) {}

  std::shared_ptr<const T> load() const {
    std::lock_guard<std::mutex> lock(mu_);
    return value_;
  }

  void store(std::shared_ptr<const T> value) {
    {
      std::lock_guard<std::mutex> lock(mu_);
      value_.swap(value);
    }
    // previous value released here, outside the lock
  }

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const T> value_;
};

}  // namespace prism
