#ifndef ODL_BATCH_HPP_
#define ODL_BATCH_HPP_

#include <vector>

#include <Eigen/Dense>

namespace odl {

/// One arriving block of observations: an n x p design and n responses.
struct Batch {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;

    Eigen::Index rows() const { return X.rows(); }
    Eigen::Index cols() const { return X.cols(); }
};

/// Row-concatenation of every batch seen so far.
struct FullDataset {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;

    static FullDataset concatenate(const std::vector<Batch>& batches);
    Batch as_batch() const { return {X, y}; }
};

}  // namespace odl

#endif  // ODL_BATCH_HPP_
