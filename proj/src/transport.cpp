#include "manta/transport.hpp"

namespace manta {

transport::transport(int workers) : m_workers(workers), m_callbacks(static_cast<std::size_t>(workers)) {
	m_bytes_sent.assign(static_cast<std::size_t>(workers), 0);
	m_bytes_received.assign(static_cast<std::size_t>(workers), 0);
}

void transport::send(int src, int dst, std::uint64_t tag, std::vector<std::byte> payload) {
	if(dst < 0 || dst >= m_workers) throw execution_error("send to unknown worker " + std::to_string(dst));
	std::function<void()> wake;
	{
		std::lock_guard lock(m_mutex);
		m_bytes_sent[static_cast<std::size_t>(src)] += payload.size();
		m_mailboxes[{src, dst, tag}].push_back(std::move(payload));
		wake = m_callbacks[static_cast<std::size_t>(dst)];
	}
	if(wake) wake();
}

std::optional<std::vector<std::byte>> transport::try_recv(int src, int dst, std::uint64_t tag) {
	std::lock_guard lock(m_mutex);
	const auto it = m_mailboxes.find({src, dst, tag});
	if(it == m_mailboxes.end() || it->second.empty()) return std::nullopt;
	auto payload = std::move(it->second.front());
	it->second.erase(it->second.begin());
	if(it->second.empty()) m_mailboxes.erase(it);
	m_bytes_received[static_cast<std::size_t>(dst)] += payload.size();
	return payload;
}

void transport::set_arrival_callback(int worker, std::function<void()> cb) {
	std::lock_guard lock(m_mutex);
	m_callbacks[static_cast<std::size_t>(worker)] = std::move(cb);
}

std::uint64_t transport::bytes_sent(int worker) const {
	std::lock_guard lock(m_mutex);
	return m_bytes_sent[static_cast<std::size_t>(worker)];
}

std::uint64_t transport::bytes_received(int worker) const {
	std::lock_guard lock(m_mutex);
	return m_bytes_received[static_cast<std::size_t>(worker)];
}

std::size_t transport::undelivered() const {
	std::lock_guard lock(m_mutex);
	std::size_t n = 0;
	for(const auto& [key, queue] : m_mailboxes) {
		n += queue.size();
	}
	return n;
}

} // namespace manta
