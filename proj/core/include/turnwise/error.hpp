#pragma once

#include <stdexcept>
#include <string>

namespace turnwise {

enum class Errc {
  insufficient_rows,
  malformed_response,
  unknown_intervention_type,
  unknown_speaker_tag,
  empty_transcript,
  malformed_line,
  empty_corpus,
  empty_evaluation,
  empty_output,
  invalid_outcome,
  group_too_small,
  missing_class,
  auth_missing,
  rate_limit_exhausted,
  remote_error,
  malformed_remote_payload,
  unrecognized_stage,
  config_invalid,
  io_error,
  invalid_argument,
};

const char* errc_name(Errc code);

/// Single exception type carrying a machine-checkable error code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

inline const char* errc_name(Errc code) {
  switch (code) {
    case Errc::insufficient_rows: return "InsufficientRows";
    case Errc::malformed_response: return "MalformedResponse";
    case Errc::unknown_intervention_type: return "UnknownInterventionType";
    case Errc::unknown_speaker_tag: return "UnknownSpeakerTag";
    case Errc::empty_transcript: return "EmptyTranscript";
    case Errc::malformed_line: return "MalformedLine";
    case Errc::empty_corpus: return "EmptyCorpus";
    case Errc::empty_evaluation: return "EmptyEvaluation";
    case Errc::empty_output: return "EmptyOutput";
    case Errc::invalid_outcome: return "InvalidOutcome";
    case Errc::group_too_small: return "GroupTooSmall";
    case Errc::missing_class: return "MissingClass";
    case Errc::auth_missing: return "AuthMissing";
    case Errc::rate_limit_exhausted: return "RateLimitedExhausted";
    case Errc::remote_error: return "RemoteError";
    case Errc::malformed_remote_payload: return "MalformedRemotePayload";
    case Errc::unrecognized_stage: return "UnrecognizedStage";
    case Errc::config_invalid: return "ConfigInvalid";
    case Errc::io_error: return "IoError";
    case Errc::invalid_argument: return "InvalidArgument";
  }
  return "UnknownError";
}

}  // namespace turnwise
