#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <vector>

#include "errors.hpp"

namespace manta {

/// In-process message passing between workers with exact tag matching. Send is
/// non-blocking; receivers poll and are woken through a registered callback when a message
/// for them arrives. Safe for concurrent use from all worker contexts.
class transport {
  public:
	explicit transport(int workers);

	void send(int src, int dst, std::uint64_t tag, std::vector<std::byte> payload);

	/// Removes and returns the message (src -> dst, tag) if it has arrived.
	std::optional<std::vector<std::byte>> try_recv(int src, int dst, std::uint64_t tag);

	/// Registers a callback invoked (without holding internal locks) whenever a message for
	/// `worker` arrives.
	void set_arrival_callback(int worker, std::function<void()> cb);

	std::uint64_t bytes_sent(int worker) const;
	std::uint64_t bytes_received(int worker) const;

	/// Number of messages still sitting in mailboxes; nonzero after a run means a
	/// send/recv protocol violation.
	std::size_t undelivered() const;

  private:
	struct mailbox_key {
		int src;
		int dst;
		std::uint64_t tag;
		friend auto operator<=>(const mailbox_key&, const mailbox_key&) = default;
	};

	mutable std::mutex m_mutex;
	int m_workers;
	std::map<mailbox_key, std::vector<std::vector<std::byte>>> m_mailboxes;
	std::vector<std::function<void()>> m_callbacks;
	std::vector<std::uint64_t> m_bytes_sent;
	std::vector<std::uint64_t> m_bytes_received;
};

} // namespace manta
