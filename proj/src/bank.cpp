#include "stablevel/bank.hpp"

#include <string>

#include "stablevel/errors.hpp"

namespace svl {

MemoryBank::MemoryBank(std::size_t dim,
                       std::size_t num_classes,
                       std::size_t capacity,
                       double p_cfg)
    : dim_(dim), num_classes_(num_classes), capacity_(capacity), p_cfg_(p_cfg)
{
    if (dim_ == 0 || capacity_ == 0)
        throw ConfigError("MemoryBank: dim and capacity must be positive");
    if (!(p_cfg_ >= 0.0 && p_cfg_ <= 1.0))
        throw RangeError("MemoryBank: p_cfg must lie in [0, 1]");
    queues_.resize(num_classes_ + 1);
    for (auto& q : queues_)
        q.data.assign(capacity_ * dim_, 0.0f);
}

std::size_t MemoryBank::queue_size(std::size_t queue) const
{
    return queues_.at(queue).size;
}

void MemoryBank::check_label(int label) const
{
    if (label < 0 || static_cast<std::size_t>(label) >= num_classes_)
        throw LabelError("MemoryBank: label " + std::to_string(label)
                         + " outside [0, " + std::to_string(num_classes_) + ")");
}

void MemoryBank::append(Queue& q, std::span<const double> x0)
{
    require_same_size(x0.size(), dim_, "MemoryBank::push");
    std::size_t slot;
    if (q.size < capacity_)
    {
        slot = (q.head + q.size) % capacity_;
        ++q.size;
    }
    else
    {
        // evict oldest
        slot = q.head;
        q.head = (q.head + 1) % capacity_;
    }
    float* dst = q.data.data() + slot * dim_;
    for (std::size_t j = 0; j < dim_; ++j)
        dst[j] = static_cast<float>(x0[j]);
}

void MemoryBank::push(std::span<const double> x0, int label)
{
    check_label(label);
    append(queues_[static_cast<std::size_t>(label)], x0);
    append(queues_[num_classes_], x0);
}

void MemoryBank::push_unlabeled(std::span<const double> x0)
{
    append(queues_[num_classes_], x0);
}

void MemoryBank::prefill(const Matrix& points, std::span<const int> labels)
{
    require_same_size(points.cols(), dim_, "MemoryBank::prefill");
    if (num_classes_ > 0)
        require_same_size(labels.size(), points.rows(), "MemoryBank::prefill labels");
    for (auto& q : queues_)
    {
        q.head = 0;
        q.size = 0;
    }
    for (std::size_t i = 0; i < points.rows(); ++i)
    {
        if (num_classes_ > 0)
        {
            check_label(labels[i]);
            auto& q = queues_[static_cast<std::size_t>(labels[i])];
            if (q.size < capacity_)
                append(q, points.row(i));
        }
        append(queues_[num_classes_], points.row(i));
    }
    for (std::size_t c = 0; c < queues_.size(); ++c)
    {
        if (queues_[c].size < capacity_)
        {
            const std::string which = c == num_classes_
                                          ? std::string("unconditional bank")
                                          : "class " + std::to_string(c);
            throw InsufficientDataError("MemoryBank::prefill: " + which + " has "
                                        + std::to_string(queues_[c].size)
                                        + " points, need " + std::to_string(capacity_));
        }
    }
}

ReferenceBatch MemoryBank::view(std::size_t queue) const
{
    const Queue& q = queues_.at(queue);
    if (q.size == 0)
        throw NotPrefilledError("MemoryBank: queue " + std::to_string(queue)
                                + " is empty");
    Matrix pts(q.size, dim_);
    for (std::size_t r = 0; r < q.size; ++r)
    {
        const float* src = q.data.data() + ((q.head + r) % capacity_) * dim_;
        auto dst = pts.row(r);
        for (std::size_t j = 0; j < dim_; ++j)
            dst[j] = src[j];
    }
    return ReferenceBatch(std::move(pts));
}

std::vector<Vector> MemoryBank::contents(std::size_t queue) const
{
    const Queue& q = queues_.at(queue);
    std::vector<Vector> out;
    out.reserve(q.size);
    for (std::size_t r = 0; r < q.size; ++r)
    {
        const float* src = q.data.data() + ((q.head + r) % capacity_) * dim_;
        out.emplace_back(src, src + dim_);
    }
    return out;
}

MemoryBank::Draw MemoryBank::draw(int label, Rng& rng) const
{
    std::size_t queue = num_classes_;
    if (num_classes_ > 0)
    {
        check_label(label);
        if (!(rng.uniform() < p_cfg_))
            queue = static_cast<std::size_t>(label);
    }
    return Draw{queue, view(queue)};
}

std::size_t MemoryBank::class_bank_bytes(std::size_t num_classes,
                                         std::size_t capacity,
                                         std::size_t dim,
                                         std::size_t bytes_per_scalar)
{
    return num_classes * capacity * dim * bytes_per_scalar;
}

}  // namespace svl
