#pragma once

#include <stdexcept>
#include <string>

namespace grad {

// All library failures derive from grad::Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A token id outside [0, vocab_size).
class InvalidTokenError : public Error {
 public:
  using Error::Error;
};

// Vectors whose lengths should agree do not.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN or infinity where finite values are required.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

class SequenceTooShortError : public Error {
 public:
  using Error::Error;
};

// Transition scores do not line up with the sequence they score.
class ScoreAlignmentError : public Error {
 public:
  using Error::Error;
};

class ReplayUnderrunError : public Error {
 public:
  using Error::Error;
};

// Vocab, graph, and logit source disagree on vocabulary size.
class IncompatibleArtifactsError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents (graph, vocab, replay, corpus).
class FormatError : public Error {
 public:
  using Error::Error;
};

// A file could not be opened, read, or written.
class IoError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class BridgeError : public Error {
 public:
  using Error::Error;
};

// The bridge peer sent something that does not follow the wire protocol.
class ProtocolError : public BridgeError {
 public:
  using BridgeError::BridgeError;
};

class BridgeTimeoutError : public BridgeError {
 public:
  using BridgeError::BridgeError;
};

}  // namespace grad
