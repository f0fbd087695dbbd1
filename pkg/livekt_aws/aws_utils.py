# livekt_aws/aws_utils.py
#

# This module publishes result artifacts (tables, charts, weights) to
# an S3 prefix, skipping files whose contents are already there.

# Import packages
import hashlib
import logging
import os
import sys
import threading

from botocore.exceptions import ClientError

logger = logging.getLogger(__name__)

S3_SCHEME = 's3://'


# Class to track percentage of S3 file upload
class ProgressPercentage(object):
    """
    Callable passed to boto3 transfers; writes the upload percentage of
    a local file to stdout
    """

    def __init__(self, filename, stream=None):
        self._filename = filename
        self._size = float(os.path.getsize(filename))
        self._seen_so_far = 0
        self._lock = threading.Lock()
        self._stream = stream or sys.stdout

    @property
    def seen_so_far(self):
        return self._seen_so_far

    def __call__(self, bytes_amount):
        with self._lock:
            self._seen_so_far += bytes_amount
            percentage = 100.0 * self._seen_so_far / self._size \
                if self._size else 100.0
            self._stream.write('{0}: {1} / {2:.0f} ({3:.2f}%)\r'.format(
                os.path.basename(self._filename), self._seen_so_far,
                self._size, percentage))
            self._stream.flush()


def parse_s3_uri(uri):
    """
    Function to split 's3://bucket/some/prefix' into
    ('bucket', 'some/prefix')
    """
    if not uri.startswith(S3_SCHEME):
        raise ValueError('not an S3 URI: {0!r}'.format(uri))
    bucket_name, _, prefix = uri[len(S3_SCHEME):].partition('/')
    if not bucket_name:
        raise ValueError('S3 URI {0!r} has no bucket name'.format(uri))
    return bucket_name, prefix.strip('/')


def file_md5(path, chunk_size=1 << 20):
    md5 = hashlib.md5()
    with open(path, 'rb') as f_in:
        for chunk in iter(lambda: f_in.read(chunk_size), b''):
            md5.update(chunk)
    return md5.hexdigest()


def remote_md5(bucket, key):
    """
    Function to return the ETag of an S3 object (its MD5 for single part
    uploads), or None when the object does not exist
    """
    try:
        obj = bucket.Object(key=key)
        obj.load()
    except ClientError:
        return None
    return str(obj.e_tag).strip('"')


def upload_artifacts(bucket, local_paths, prefix=''):
    """
    Function to upload local result files under an S3 prefix

    Parameters
    ----------
    :param bucket: boto3 Bucket instance
        bucket to upload to
    :type local_paths: list
    :param local_paths: files to publish; each is stored as
        <prefix>/<basename>
    :type prefix: str
    :param prefix: (optional), default=''
        key prefix inside the bucket

    Returns
    -------
    :return: uploaded : list
        keys that were (re)uploaded; files whose MD5 matches the remote
        ETag are skipped
    """

    uploaded = []
    num_files = len(local_paths)
    for idx, src_file in enumerate(local_paths):
        name = os.path.basename(src_file)
        dst_key = '/'.join([prefix, name]) if prefix else name

        if remote_md5(bucket, dst_key) == file_md5(src_file):
            logger.info('s3://%s/%s is up to date', bucket.name, dst_key)
        else:
            print('Uploading {0} to s3://{1}/{2}'.format(src_file,
                                                         bucket.name,
                                                         dst_key))
            bucket.upload_file(src_file, dst_key,
                               Callback=ProgressPercentage(src_file))
            uploaded.append(dst_key)
        print('finished file {0}/{1}'.format(idx + 1, num_files))

    return uploaded


def publish_results(uri, local_paths, creds_path=None):
    """
    Function to open the bucket named by an s3:// URI and upload the
    given files under its prefix
    """
    from livekt_aws.fetch_creds import return_bucket

    bucket_name, prefix = parse_s3_uri(uri)
    bucket = return_bucket(creds_path, bucket_name)
    return upload_artifacts(bucket, local_paths, prefix)
