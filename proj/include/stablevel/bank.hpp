#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "matrix.hpp"
#include "rng.hpp"
#include "targets.hpp"

namespace svl {

/*!
 * Class-conditional FIFO memory bank. Queues 0..C-1 hold references of one
 * class each; queue C is the unconditional bank and receives every push.
 * Entries are stored as 32-bit floats; draws return float64 snapshots.
 */
class MemoryBank
{
  public:
    MemoryBank(std::size_t dim,
               std::size_t num_classes,
               std::size_t capacity = 256,
               double p_cfg = 0.1);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t num_classes() const noexcept { return num_classes_; }
    std::size_t capacity() const noexcept { return capacity_; }
    double p_cfg() const noexcept { return p_cfg_; }
    std::size_t unconditional() const noexcept { return num_classes_; }
    std::size_t queue_count() const noexcept { return queues_.size(); }
    std::size_t queue_size(std::size_t queue) const;

    /*!
     * Fills every class queue with the first K points of that class in
     * dataset order, and the unconditional queue with the last K points
     * overall. `labels` may be empty only when num_classes() == 0.
     * Throws InsufficientDataError naming the first short class.
     */
    void prefill(const Matrix& points, std::span<const int> labels);

    // Appends to queue[label] and the unconditional queue, evicting the
    // oldest entry of any full queue. Throws LabelError for label >= C.
    void push(std::span<const double> x0, int label);
    // Appends to the unconditional queue only.
    void push_unlabeled(std::span<const double> x0);

    struct Draw
    {
        std::size_t effective_label;
        ReferenceBatch refs;
    };

    // With probability p_cfg returns the unconditional queue, otherwise the
    // queue of `label`. Throws NotPrefilledError on an empty queue.
    Draw draw(int label, Rng& rng) const;

    // Snapshot of a queue, oldest entry first.
    ReferenceBatch view(std::size_t queue) const;
    std::vector<Vector> contents(std::size_t queue) const;

    // Storage for C class queues of K entries at the given scalar width.
    static std::size_t class_bank_bytes(std::size_t num_classes,
                                        std::size_t capacity,
                                        std::size_t dim,
                                        std::size_t bytes_per_scalar = sizeof(float));

  private:
    struct Queue
    {
        std::vector<float> data;  // capacity x dim ring buffer
        std::size_t head = 0;     // index of the oldest entry
        std::size_t size = 0;
    };

    void append(Queue& q, std::span<const double> x0);
    void check_label(int label) const;

    std::size_t dim_;
    std::size_t num_classes_;
    std::size_t capacity_;
    double p_cfg_;
    std::vector<Queue> queues_;
};

}  // namespace svl
