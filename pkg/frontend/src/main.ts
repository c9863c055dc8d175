import { HttpApi } from './api';
import { MockApi } from './mock';
import { App } from './app';

// `?mock` runs the whole app against the in-memory fixture service, which is
// also what the test suite drives; without it the app talks to /v1 directly.
const params = new URLSearchParams(location.search);
const api = params.has('mock') ? new MockApi() : new HttpApi('');

const root = document.getElementById('app');
if (!root) throw new Error('missing #app mount point');
new App(api, root).start();
